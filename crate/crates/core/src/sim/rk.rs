//! Dormand-Prince 5(4) embedded Runge-Kutta pair.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Order of the propagated solution.
pub const ORDER: i32 = 5;

/// Reusable stage storage for one system dimension.
pub struct Workspace {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
        }
    }

    /// Derivative at the start of the next step (first-same-as-last).
    pub fn first_stage_mut(&mut self) -> &mut [f64] {
        &mut self.k[0]
    }

    /// Accepts the last step: its final stage becomes the next first stage.
    pub fn advance(&mut self) {
        self.k.swap(0, 6);
    }
}

/// One step of size `h` from `(t, y)`. The derivative at `(t, y)` must already
/// sit in the workspace's first stage. Writes the 5th-order solution to
/// `y_out` and the embedded error estimate to `err`.
pub fn step<F>(f: &mut F, t: f64, y: &[f64], h: f64, ws: &mut Workspace, y_out: &mut [f64], err: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in A[s][..s].iter().enumerate() {
                acc += a * ws.k[j][i];
            }
            ws.stage[i] = y[i] + h * acc;
        }
        f(t + C[s] * h, &ws.stage, &mut ws.k[s]);
    }
    // stage 7 is evaluated at the 5th-order solution
    y_out.copy_from_slice(&ws.stage);
    for i in 0..n {
        let mut e = 0.0;
        for (s, w) in E.iter().enumerate() {
            e += w * ws.k[s][i];
        }
        err[i] = h * e;
    }
}

/// Fixed-step integration with `steps` equal steps; no error control.
pub fn integrate_fixed<F>(mut f: F, y0: &[f64], t0: f64, t_end: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let h = (t_end - t0) / steps as f64;
    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    f(t0, &y, ws.first_stage_mut());
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        step(&mut f, t, &y, h, &mut ws, &mut y_new, &mut err);
        std::mem::swap(&mut y, &mut y_new);
        ws.advance();
    }
    y
}
