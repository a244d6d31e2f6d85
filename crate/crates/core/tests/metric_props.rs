use fluidps_core::metrics::reference::prohorov_atoms;
use fluidps_core::{prohorov, total_variation, GridMeasure};
use proptest::prelude::*;

const H: f64 = 0.01;
const CELLS: usize = 100;

fn lattice_atoms() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0..CELLS, 0.0..1.0f64), 0..=6)
}

fn free_atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..(CELLS as f64 * H), 0.0..1.0f64), 0..=6)
}

fn from_lattice(a: &[(usize, f64)]) -> GridMeasure {
    let mut m = vec![0.0; CELLS];
    for &(k, w) in a {
        m[k] += w;
    }
    GridMeasure::from_cell_masses(H, &m).unwrap()
}

fn from_free(a: &[(f64, f64)]) -> GridMeasure {
    let mut m = vec![0.0; CELLS];
    for &(x, w) in a {
        m[((x / H) as usize).min(CELLS - 1)] += w;
    }
    GridMeasure::from_cell_masses(H, &m).unwrap()
}

fn centres(a: &[(usize, f64)]) -> Vec<(f64, f64)> {
    a.iter().map(|&(k, w)| ((k as f64 + 0.5) * H, w)).collect()
}

fn spread() -> impl Strategy<Value = GridMeasure> {
    prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.0..0.1f64], 50)
        .prop_map(|m| GridMeasure::from_cell_masses(0.02, &m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lattice_atoms_match_exhaustive(a in lattice_atoms(), b in lattice_atoms()) {
        let fast = prohorov(&from_lattice(&a), &from_lattice(&b)).unwrap().value;
        let slow = prohorov_atoms(&centres(&a), &centres(&b), 1e-9);
        prop_assert!((fast - slow).abs() <= 1e-6 + H, "fast {fast} slow {slow}");
    }

    #[test]
    fn off_lattice_atoms_within_two_cells(a in free_atoms(), b in free_atoms()) {
        let fast = prohorov(&from_free(&a), &from_free(&b)).unwrap();
        let slow = prohorov_atoms(&a, &b, 1e-9);
        prop_assert!((fast.value - slow).abs() <= fast.error + 1e-9, "fast {fast:?} slow {slow}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_axioms(a in spread(), b in spread(), c in spread()) {
        let ab = prohorov(&a, &b).unwrap();
        let ba = prohorov(&b, &a).unwrap();
        let bc = prohorov(&b, &c).unwrap();
        let ac = prohorov(&a, &c).unwrap();
        prop_assert_eq!(prohorov(&a, &a).unwrap().value, 0.0);
        prop_assert!(ab.value >= 0.0);
        prop_assert!((ab.value - ba.value).abs() <= 3.0 * ab.error.max(ba.error));
        prop_assert!(ac.value <= ab.value + bc.value + 3.0 * ac.error.max(ab.error).max(bc.error));
    }

    #[test]
    fn prohorov_below_total_variation(a in spread(), b in spread()) {
        let rho = prohorov(&a, &b).unwrap();
        let tv = total_variation(&a, &b).unwrap();
        prop_assert!(rho.value <= tv.value + rho.error + tv.error);
    }

    #[test]
    fn total_variation_is_a_metric(a in spread(), b in spread(), c in spread()) {
        let ab = total_variation(&a, &b).unwrap().value;
        let ba = total_variation(&b, &a).unwrap().value;
        let bc = total_variation(&b, &c).unwrap().value;
        let ac = total_variation(&a, &c).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}
