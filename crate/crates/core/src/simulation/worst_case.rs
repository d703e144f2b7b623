//! Worst-case switching for planar pairs: follow the field that points
//! outward relative to the other, switching on the lines where the two
//! fields are collinear.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::signal::{Segment, SwitchingSignal, MIN_DWELL};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::expm::expm_scaled;
use crate::linalg::{spectral_norm, sym};

#[derive(Debug, Clone)]
pub struct WorstCase {
    pub trajectory: Trajectory,
    /// Norm ratio `|x(θ0 + 2πk)| / |x(θ0 + 2π(k-1))|` for each full rotation.
    pub ratios: Vec<f64>,
    pub contraction_per_rotation: f64,
}

fn cross(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn unit(theta: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.cos(), theta.sin()])
}

fn j2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// Angles in `[0, 2π)` of the four rays on which `A_1 x` and `A_2 x` are
/// collinear, i.e. the zero set of `x ↦ det[A_1 x | A_2 x]`.
pub fn collinearity_rays(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a1.shape() != (2, 2) || a2.shape() != (2, 2) {
        return Err(Error::NotPlanar);
    }
    let form = sym(&(a1.transpose() * j2() * a2));
    let eig = SymmetricEigen::new(form.clone());
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let scale = (a1.norm() * a2.norm()).max(f64::MIN_POSITIVE);
    // Indefinite with both eigenvalues clearly away from zero.
    if !(l0 * l1 < 0.0 && l0.abs().min(l1.abs()) > 1e-12 * scale) {
        return Err(Error::NoCollinearityLines);
    }
    let (pos, neg, e_pos, e_neg) = if l0 > 0.0 {
        (l0, l1, eig.eigenvectors.column(0), eig.eigenvectors.column(1))
    } else {
        (l1, l0, eig.eigenvectors.column(1), eig.eigenvectors.column(0))
    };
    let mut rays = Vec::with_capacity(4);
    for sign in [1.0, -1.0] {
        let d = e_pos * (-neg).sqrt() + e_neg * (sign * pos.sqrt());
        let theta = d[1].atan2(d[0]).rem_euclid(TAU);
        rays.push(theta);
        rays.push((theta + PI).rem_euclid(TAU));
    }
    rays.sort_by(|a, b| a.total_cmp(b));
    Ok(rays)
}

/// Rotation sign of `ẋ = A x` (+1 counter-clockwise) when `x × Ax` has a
/// constant sign on the circle.
fn rotation_sign(a: &DMatrix<f64>) -> Option<f64> {
    // x × Ax = x^T J A x with cross(u, v) = u^T J v
    let form = sym(&(j2() * a));
    let eig = SymmetricEigen::new(form);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if l0 > 0.0 && l1 > 0.0 {
        Some(1.0)
    } else if l0 < 0.0 && l1 < 0.0 {
        Some(-1.0)
    } else {
        None
    }
}

/// Mode whose field points outward relative to the other at `x`: larger
/// radial rate per unit of angular progress. Ties go to mode 0.
fn outward_mode(modes: [&DMatrix<f64>; 2], x: &DVector<f64>) -> usize {
    let quotient = |a: &DMatrix<f64>| {
        let v = a * x;
        x.dot(&v) / cross(x, &v).abs()
    };
    if quotient(modes[1]) > quotient(modes[0]) {
        1
    } else {
        0
    }
}

/// Follows the outward-pointing mode in each sector for `rotations` full
/// turns and reports the norm ratio per turn.
pub fn worst_case_planar(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    x0: &DVector<f64>,
    rotations: usize,
) -> Result<WorstCase> {
    if x0.len() != 2 {
        return Err(Error::NotPlanar);
    }
    let rays = collinearity_rays(a1, a2)?;
    let s1 = rotation_sign(a1).ok_or(Error::NonRotating { mode: 0 })?;
    let s2 = rotation_sign(a2).ok_or(Error::NonRotating { mode: 1 })?;
    if s1 != s2 {
        return Err(Error::NonRotating { mode: 1 });
    }
    if x0.norm() == 0.0 || rotations == 0 {
        return Err(Error::InvalidArgument("need a nonzero initial state and at least one rotation".into()));
    }
    let orient = s1;
    let theta0 = x0[1].atan2(x0[0]);
    // Boundaries as angular progress from θ0 in the direction of rotation.
    let mut base: Vec<f64> = rays
        .iter()
        .map(|b| (orient * (b - theta0)).rem_euclid(TAU))
        .collect();
    base.sort_by(|a, b| a.total_cmp(b));
    let modes = [a1, a2];
    let step_len = [0.05 / spectral_norm(a1), 0.05 / spectral_norm(a2)];

    let first_mid = {
        let next = base.iter().copied().find(|b| *b > 1e-12).unwrap_or(TAU);
        theta0 + orient * next / 2.0
    };
    let mut traj = Trajectory::start(
        SwitchingSignal::new(vec![]).expect("empty signal"),
        x0,
        outward_mode(modes, &unit(first_mid)),
    );
    let mut segments: Vec<Segment> = Vec::new();
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut progress = 0.0;
    let mut ratios = Vec::with_capacity(rotations);
    let mut mark_norm = x.norm();
    let end = TAU * rotations as f64;

    while progress < end - 1e-12 {
        let turn = (progress / TAU).floor();
        let next_boundary = base
            .iter()
            .map(|b| b + TAU * turn)
            .chain(base.iter().map(|b| b + TAU * (turn + 1.0)))
            .find(|b| *b > progress + 1e-12)
            .expect("boundaries repeat every turn");
        let next_mark = TAU * (turn + 1.0);
        let target = next_boundary.min(next_mark);
        let mid = theta0 + orient * (progress + next_boundary) / 2.0;
        let p = outward_mode(modes, &unit(mid));
        let a = modes[p];
        let h = step_len[p];
        let step = expm_scaled(a, h);
        let seg_start = t;

        loop {
            let next = &step * &x;
            let delta = orient * cross(&x, &next).atan2(x.dot(&next));
            if delta <= 0.0 {
                return Err(Error::NonRotating { mode: p });
            }
            if progress + delta >= target {
                // Bisect on the time at which the progress reaches the target.
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..80 {
                    let mid_t = 0.5 * (lo + hi);
                    let y = expm_scaled(a, mid_t) * &x;
                    let d = orient * cross(&x, &y).atan2(x.dot(&y));
                    if progress + d < target {
                        lo = mid_t;
                    } else {
                        hi = mid_t;
                    }
                }
                x = expm_scaled(a, hi) * &x;
                t += hi;
                progress = target;
                traj.push(t, x.clone(), p);
                break;
            }
            x = next;
            t += h;
            progress += delta;
            traj.push(t, x.clone(), p);
        }

        let dur = t - seg_start;
        if dur >= MIN_DWELL {
            match segments.last_mut() {
                Some(last) if last.mode == p => last.duration += dur,
                _ => segments.push(Segment { mode: p, duration: dur }),
            }
        }
        if (progress - next_mark).abs() <= 1e-12 {
            let nm = x.norm();
            ratios.push(nm / mark_norm);
            mark_norm = nm;
        }
    }

    traj.signal = SwitchingSignal::new(segments)?;
    let contraction_per_rotation = *ratios.last().expect("at least one rotation");
    Ok(WorstCase {
        trajectory: traj,
        ratios,
        contraction_per_rotation,
    })
}
