//! Exhaustive Prohorov distance between small atomic measures, used as an
//! oracle for the lattice algorithm.

/// An atom `(position, mass)`.
pub type Atom = (f64, f64);

fn one_sided(a: &[Atom], b: &[Atom], delta: f64) -> bool {
    let n = a.len();
    for mask in 1u32..(1 << n) {
        let mut pa = 0.0;
        for (i, atom) in a.iter().enumerate() {
            if mask & (1 << i) != 0 {
                pa += atom.1;
            }
        }
        // mass of b in the open δ-neighbourhood of the chosen atoms
        let pb: f64 = b
            .iter()
            .filter(|(y, _)| {
                a.iter()
                    .enumerate()
                    .any(|(i, (x, _))| mask & (1 << i) != 0 && (x - y).abs() < delta)
            })
            .map(|(_, m)| m)
            .sum();
        if pa > pb + delta + 1e-15 {
            return false;
        }
    }
    true
}

/// `true` when `δ` is admissible in both directions.
pub fn feasible(a: &[Atom], b: &[Atom], delta: f64) -> bool {
    one_sided(a, b, delta) && one_sided(b, a, delta)
}

/// Prohorov distance by bisection over `δ` on top of subset enumeration.
/// Intended for a handful of atoms (`2^n` subsets).
pub fn prohorov_atoms(a: &[Atom], b: &[Atom], tol: f64) -> f64 {
    assert!(
        a.len() <= 16 && b.len() <= 16,
        "oracle is exponential in the atom count"
    );
    let ma: f64 = a.iter().map(|x| x.1).sum();
    let mb: f64 = b.iter().map(|x| x.1).sum();
    let mut hi = ma.max(mb) + 1e-12;
    let mut lo = 0.0;
    if feasible(a, b, 0.0) {
        return 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(a, b, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_atoms_apart() {
        let d = prohorov_atoms(&[(0.0, 1.0)], &[(0.4, 1.0)], 1e-10);
        assert!((d - 0.4).abs() < 1e-9);
    }

    #[test]
    fn distance_to_nothing_is_mass() {
        let d = prohorov_atoms(&[(1.0, 0.3)], &[], 1e-10);
        assert!((d - 0.3).abs() < 1e-9);
    }

    #[test]
    fn far_atoms_cost_the_smaller_mass() {
        // moving is too expensive; the mismatch is paid in mass
        let d = prohorov_atoms(&[(0.0, 0.2)], &[(5.0, 0.2)], 1e-10);
        assert!((d - 0.2).abs() < 1e-9);
    }
}
