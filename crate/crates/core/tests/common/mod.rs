#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restframe::kinematics::Vec3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in the ball of radius `r`.
pub fn random_in_ball<R: Rng>(rng: &mut R, r: f64) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v * r;
        }
    }
}

/// Adaptive Dormand-Prince 5(4) integration of the autonomous system
/// `y' = f(y)` from `t0` to each time in `outputs` (ascending). Returns the
/// state at each output time.
pub fn dormand_prince<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    y0: [f64; N],
    t0: f64,
    outputs: &[f64],
    rtol: f64,
    atol: f64,
) -> Vec<[f64; N]> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-3_f64;
    let mut out = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while t < target {
            let step = h.min(target - t);
            let mut k = [[0.0; N]; 7];
            for s in 0..7 {
                let mut ys = y;
                for (j, row) in k.iter().enumerate().take(s) {
                    for i in 0..N {
                        ys[i] += step * A[s][j] * row[i];
                    }
                }
                k[s] = f(&ys);
            }
            let mut y5 = y;
            let mut err = 0.0_f64;
            for i in 0..N {
                let (mut d5, mut d4) = (0.0, 0.0);
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] += step * d5;
                let scale = atol + rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (d5 - d4)).abs() / scale);
            }
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        out.push(y);
    }
    out
}
