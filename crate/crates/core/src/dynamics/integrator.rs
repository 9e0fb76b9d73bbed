//! Dormand–Prince 5(4) with step-size control, stepping exactly onto
//! requested output times.

use crate::error::{Error, Result};

pub type State = [f64; 6];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (same as the last row of A, so the last stage is
/// reused as the first stage of the next step).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub relative: f64,
    pub absolute: f64,
}

pub struct Dopri5<F> {
    rhs: F,
    tol: Tolerances,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl<F: FnMut(f64, &State) -> Result<State>> Dopri5<F> {
    pub fn new(mut rhs: F, t0: f64, y0: State, initial_step: f64, tol: Tolerances) -> Result<Self> {
        let k1 = rhs(t0, &y0)?;
        Ok(Dopri5 {
            rhs,
            tol,
            t: t0,
            y: y0,
            k1,
            h: initial_step,
            steps: 0,
            rejected: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &State {
        &self.y
    }

    /// Advance to exactly `t_end`, taking as many adaptive steps as needed.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h <= 1e-14 * self.t.abs().max(1e-300) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let (y_new, k7, err) = self.trial(h)?;
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
            } else {
                self.rejected += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            let next = h * factor;
            // a step clipped to hit an output time says nothing about the natural step
            if !(last && err <= 1.0 && next > self.h) {
                self.h = next;
            }
            if !self.h.is_finite() || self.h <= 0.0 {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
        }
        Ok(())
    }

    fn trial(&mut self, h: f64) -> Result<(State, State, f64)> {
        let mut k = [[0.0; 6]; 7];
        k[0] = self.k1;
        for s in 1..7 {
            let mut ys = self.y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..6 {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = (self.rhs)(self.t + C[s] * h, &ys)?;
        }
        let mut y5 = self.y;
        let mut acc = 0.0;
        for i in 0..6 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += h * d5;
            let scale = self.tol.absolute + self.tol.relative * self.y[i].abs().max(y5[i].abs());
            let e = h * (d5 - d4) / scale;
            acc += e * e;
        }
        Ok((y5, k[6], (acc / 6.0).sqrt()))
    }
}
