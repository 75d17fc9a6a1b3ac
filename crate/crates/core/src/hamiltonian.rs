//! Internal spin Hamiltonians and the zeroth-order average-Hamiltonian oracle.

use crate::error::{Error, Result};
use crate::linalg::{conjugate, conjugate_diagonal, frobenius, identity, CMatrix, C64};
use crate::sequence::{PulseSequence, SequenceEvent};
use crate::spin::{rotation, z_rotation_diagonal, Operator, SpinSystem};

/// Zeroth-order average Hamiltonian of a cycle compared against a target.
#[derive(Debug, Clone)]
pub struct AverageHamiltonianReport {
    pub h_avg: Operator,
    pub target: Operator,
    /// `‖H_avg − target‖_F / ‖target‖_F`, or the absolute difference when the
    /// target vanishes.
    pub relative_error: f64,
}

/// Chemical-shift term `Σ_i ω_i I_z^i`.
pub fn zeeman(sys: &SpinSystem) -> Operator {
    let dim = sys.dim();
    let m = sys.n_spins();
    let mut h = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        let e: f64 = (0..m)
            .map(|i| {
                let down = (r >> (m - 1 - i)) & 1 == 1;
                sys.offsets()[i] * if down { -0.5 } else { 0.5 }
            })
            .sum();
        h[(r, r)] = C64::new(e, 0.0);
    }
    Operator::new(h, "H_Z")
}

fn require_pairs(sys: &SpinSystem) -> Result<()> {
    if sys.n_spins() < 2 {
        Err(Error::TooFewSpins {
            required: 2,
            got: sys.n_spins(),
        })
    } else {
        Ok(())
    }
}

/// Visit every spin pair `i < j` together with the bit masks selecting them.
fn for_each_pair(sys: &SpinSystem, mut f: impl FnMut(f64, usize, usize)) {
    let m = sys.n_spins();
    for i in 0..m {
        for j in (i + 1)..m {
            let d = sys.coupling(i, j);
            if d != 0.0 {
                f(d, 1 << (m - 1 - i), 1 << (m - 1 - j));
            }
        }
    }
}

/// Secular homonuclear dipolar coupling `Σ_{i<j} D_ij (3 I_z^i I_z^j − I^i·I^j)`.
pub fn dipolar(sys: &SpinSystem) -> Result<Operator> {
    require_pairs(sys)?;
    let dim = sys.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for_each_pair(sys, |d, bi, bj| {
        for col in 0..dim {
            let zi = if col & bi == 0 { 0.5 } else { -0.5 };
            let zj = if col & bj == 0 { 0.5 } else { -0.5 };
            // 3 I_z I_z − I_z I_z
            h[(col, col)] += C64::new(2.0 * d * zi * zj, 0.0);
            // −(I_x I_x + I_y I_y) = −(I_+ I_- + I_- I_+)/2 on antiparallel pairs
            if zi != zj {
                h[(col ^ bi ^ bj, col)] += C64::new(-0.5 * d, 0.0);
            }
        }
    });
    Ok(Operator::new(h, "H_D"))
}

/// `H_Z + H_D` (the dipolar part only when there is more than one spin).
pub fn internal(sys: &SpinSystem) -> Operator {
    let mut h = zeeman(sys).matrix;
    if sys.n_spins() >= 2 {
        h += dipolar(sys).expect("at least two spins").matrix;
    }
    Operator::new(h, "H_int")
}

/// Two-quantum Hamiltonian `Σ_{i<j} (D_ij/2)(I_+^i I_+^j + I_-^i I_-^j)`.
pub fn two_quantum_target(sys: &SpinSystem) -> Result<Operator> {
    require_pairs(sys)?;
    let dim = sys.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for_each_pair(sys, |d, bi, bj| {
        let both = bi | bj;
        for col in 0..dim {
            match col & both {
                // both down: raised to both up
                x if x == both => h[(col & !both, col)] += C64::new(0.5 * d, 0.0),
                // both up: lowered to both down
                0 => h[(col | both, col)] += C64::new(0.5 * d, 0.0),
                _ => {}
            }
        }
    });
    Ok(Operator::new(h, "H_1"))
}

/// `exp(-i α I_z^tot) H exp(+i α I_z^tot)`.
pub fn phase_shifted(h: &Operator, sys: &SpinSystem, alpha: f64) -> Result<Operator> {
    if h.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: h.dim(),
        });
    }
    let d = z_rotation_diagonal(sys, alpha);
    Ok(Operator::new(
        conjugate_diagonal(&d, &h.matrix),
        format!("{}(α={alpha:.4})", h.label),
    ))
}

/// Zeroth-order Magnus term of `seq` under `H_Z + H_D` in the toggling frame of
/// its ideal pulses: `(1/T) Σ_k τ_k Ũ_k† H Ũ_k`.
pub fn magnus0(
    seq: &PulseSequence,
    sys: &SpinSystem,
    target: &Operator,
) -> Result<AverageHamiltonianReport> {
    magnus0_with(seq, sys, &internal(sys), target)
}

/// [`magnus0`] for an arbitrary time-independent Hamiltonian `h`.
pub fn magnus0_with(
    seq: &PulseSequence,
    sys: &SpinSystem,
    h: &Operator,
    target: &Operator,
) -> Result<AverageHamiltonianReport> {
    let total = seq.total_duration();
    if !(total > 0.0) {
        return Err(Error::NonPositiveDuration(total));
    }
    if h.dim() != sys.dim() || target.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: h.dim().max(target.dim()),
        });
    }
    let dim = sys.dim();
    let mut frame = identity(dim);
    let mut acc = CMatrix::zeros(dim, dim);
    for (index, event) in seq.events().iter().enumerate() {
        match event {
            SequenceEvent::Delay { duration } => {
                if *duration > 0.0 {
                    acc += conjugate(&frame.adjoint(), &h.matrix) * C64::new(*duration, 0.0);
                }
            }
            SequenceEvent::Pulse(p) => {
                if p.duration > 0.0 {
                    return Err(Error::FinitePulse { index });
                }
                frame = rotation(sys, p.flip_angle, p.phase).matrix * frame;
            }
        }
    }
    let h_avg = acc / C64::new(total, 0.0);
    let diff = frobenius(&(&h_avg - &target.matrix));
    let norm = target.norm();
    let relative_error = if norm > 0.0 { diff / norm } else { diff };
    Ok(AverageHamiltonianReport {
        h_avg: Operator::new(h_avg, format!("avg({})", h.label)),
        target: target.clone(),
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;
    use crate::spin::{single_spin_op, total_op, Axis};
    use std::f64::consts::PI;

    fn op(sys: &SpinSystem, i: usize, a: Axis) -> CMatrix {
        single_spin_op(sys, i, a).unwrap().matrix
    }

    #[test]
    fn zeeman_examples() {
        let zero = SpinSystem::uncoupled(3).unwrap();
        assert_eq!(frobenius(&zeeman(&zero).matrix), 0.0);
        let one = SpinSystem::uncoupled(1)
            .unwrap()
            .with_offsets(vec![2.0 * PI * 100.0])
            .unwrap();
        let h = zeeman(&one).matrix;
        assert!((h[(0, 0)].re - PI * 100.0).abs() < 1e-12);
        assert!((h[(1, 1)].re + PI * 100.0).abs() < 1e-12);
    }

    #[test]
    fn zeeman_spectrum_is_all_sign_patterns() {
        let offsets = vec![1.0, 2.5, -4.0];
        let sys = SpinSystem::uncoupled(3).unwrap().with_offsets(offsets.clone()).unwrap();
        let mut got: Vec<f64> = zeeman(&sys).matrix.diagonal().iter().map(|z| z.re).collect();
        let mut expected = Vec::new();
        for pattern in 0..8u32 {
            let e: f64 = (0..3)
                .map(|i| if pattern >> i & 1 == 1 { -offsets[i] / 2.0 } else { offsets[i] / 2.0 })
                .sum();
            expected.push(e);
        }
        got.sort_by(f64::total_cmp);
        expected.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dipolar_matches_operator_products() {
        let sys = SpinSystem::default_test(4).unwrap();
        let mut reference = CMatrix::zeros(16, 16);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let dot = op(&sys, i, Axis::X) * op(&sys, j, Axis::X)
                    + op(&sys, i, Axis::Y) * op(&sys, j, Axis::Y)
                    + op(&sys, i, Axis::Z) * op(&sys, j, Axis::Z);
                let zz = op(&sys, i, Axis::Z) * op(&sys, j, Axis::Z);
                reference += (zz * C64::new(3.0, 0.0) - dot) * C64::new(sys.coupling(i, j), 0.0);
            }
        }
        assert!(frobenius(&(dipolar(&sys).unwrap().matrix - reference)) < 1e-9);
    }

    #[test]
    fn two_spin_dipolar_eigenvalues() {
        let d = 3.0;
        let sys = SpinSystem::uniform(2, d).unwrap();
        let h = dipolar(&sys).unwrap().matrix;
        let s = 0.5f64.sqrt();
        // |↑↑⟩, |↓↓⟩, triplet-0, singlet
        let states = [
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, s, s, 0.0],
            vec![0.0, s, -s, 0.0],
        ];
        let energies = [d / 2.0, d / 2.0, -d, 0.0];
        for (v, e) in states.iter().zip(energies) {
            let v = nalgebra::DVector::from_iterator(4, v.iter().map(|&x| C64::new(x, 0.0)));
            let hv = &h * &v;
            assert!((hv - v * C64::new(e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn dipolar_is_secular_and_needs_two_spins() {
        let sys = SpinSystem::default_test(4).unwrap();
        let h = dipolar(&sys).unwrap().matrix;
        let iz = total_op(&sys, Axis::Z).matrix;
        assert!(frobenius(&commutator(&h, &iz)) < 1e-12);
        assert_eq!(
            dipolar(&SpinSystem::uncoupled(1).unwrap()).unwrap_err(),
            Error::TooFewSpins { required: 2, got: 1 }
        );
        assert_eq!(frobenius(&dipolar(&SpinSystem::uncoupled(3).unwrap()).unwrap().matrix), 0.0);
    }

    #[test]
    fn two_quantum_structure() {
        let sys = SpinSystem::default_test(4).unwrap();
        let h = two_quantum_target(&sys).unwrap();
        assert!(h.is_hermitian(1e-15));
        for r in 0..16 {
            for c in 0..16 {
                if h.matrix[(r, c)].norm() > 0.0 {
                    assert_eq!(sys.order_of(r, c).abs(), 2);
                }
            }
        }
        let two = SpinSystem::uniform(2, 5.0).unwrap();
        let h2 = two_quantum_target(&two).unwrap().matrix;
        assert_eq!(h2[(0b00, 0b11)], C64::new(2.5, 0.0));
        // From raising/lowering products directly.
        let reference = (op(&two, 0, Axis::Plus) * op(&two, 1, Axis::Plus)
            + op(&two, 0, Axis::Minus) * op(&two, 1, Axis::Minus))
            * C64::new(2.5, 0.0);
        assert!(frobenius(&(h2 - reference)) < 1e-15);
    }

    #[test]
    fn phase_shift_examples() {
        let sys = SpinSystem::default_test(4).unwrap();
        let h1 = two_quantum_target(&sys).unwrap();
        assert_eq!(phase_shifted(&h1, &sys, 0.0).unwrap().matrix, h1.matrix);
        let rev = phase_shifted(&h1, &sys, PI / 2.0).unwrap().matrix;
        assert!(frobenius(&(rev + &h1.matrix)) < 1e-12 * h1.norm());
        // α = π/4: the raising block picks up e^{-iπ/2}, the lowering block e^{+iπ/2}.
        let q = phase_shifted(&h1, &sys, PI / 4.0).unwrap().matrix;
        for r in 0..16 {
            for c in 0..16 {
                let expected = match sys.order_of(r, c) {
                    2 => h1.matrix[(r, c)] * C64::new(0.0, -1.0),
                    -2 => h1.matrix[(r, c)] * C64::new(0.0, 1.0),
                    _ => C64::new(0.0, 0.0),
                };
                assert!((q[(r, c)] - expected).norm() < 1e-12 * h1.norm());
            }
        }
        let hd = dipolar(&sys).unwrap();
        let shifted = phase_shifted(&hd, &sys, 0.77).unwrap().matrix;
        assert!(frobenius(&(shifted - &hd.matrix)) < 1e-12 * hd.norm());
    }

    #[test]
    fn magnus_of_plain_delay_is_internal_hamiltonian() {
        let sys = SpinSystem::default_test(3).unwrap().with_offsets(vec![10.0, -3.0, 7.0]).unwrap();
        let seq = PulseSequence::from_events(vec![SequenceEvent::Delay { duration: 1e-5 }]);
        let h = internal(&sys);
        let report = magnus0(&seq, &sys, &h).unwrap();
        assert!(report.relative_error < 1e-15);
    }

    #[test]
    fn magnus_rejects_finite_pulses_and_empty_sequences() {
        let sys = SpinSystem::uncoupled(2).unwrap();
        let target = internal(&sys);
        let empty = PulseSequence::from_events(vec![]);
        assert!(matches!(magnus0(&empty, &sys, &target), Err(Error::NonPositiveDuration(_))));
        let seq = PulseSequence::from_events(vec![
            SequenceEvent::Delay { duration: 1e-6 },
            SequenceEvent::Pulse(crate::sequence::Pulse::pi(1e-6, 0.0)),
        ]);
        assert_eq!(magnus0(&seq, &sys, &target).unwrap_err(), Error::FinitePulse { index: 1 });
    }
}
