//! Central finite differences of the masked loss for two-layer sub-band
//! models, computed from plain nested loops rather than the library's
//! im2col path.
//!
//! A perturbed parameter only moves a few pre-activations, so each
//! difference is evaluated on the affected terms alone: the loss change is
//! the sum of per-term changes, which is exact up to rounding and avoids
//! re-running the whole network per parameter.

use signret::network::{Model, LOG_EPS};
use signret::subband::{AmpTensor3D, SignTensor3D, BANDS};

const K: usize = 3;

pub struct Reference {
    pub cin: usize,
    pub hidden: usize,
    pub cout: usize,
    pub w: usize,
    pub h: usize,
    input: Vec<f64>,
    w0: Vec<f64>,
    b0: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    pre0: Vec<f64>,
    act0: Vec<f64>,
    pre1: Vec<f64>,
    labels: Vec<Option<bool>>,
    norm: f64,
}

fn term(z: f64, label: Option<bool>) -> f64 {
    let f = (1.0 / (1.0 + (-z).exp())).clamp(LOG_EPS, 1.0 - LOG_EPS);
    match label {
        Some(true) => -f.ln(),
        Some(false) => -(1.0 - f).ln(),
        None => 0.0,
    }
}

impl Reference {
    pub fn new(model: &Model<f64>, amp: &AmpTensor3D, sign: &SignTensor3D) -> Self {
        let layers = model.layers();
        assert_eq!(layers.len(), 2, "reference covers two-layer models");
        let (l0, l1) = (&layers[0], &layers[1]);
        let (w, h) = (amp.blocks_x(), amp.blocks_y());
        let plane = w * h;
        let input: Vec<f64> = amp.as_slice().iter().map(|&a| f64::from(a)).collect();
        let labels = (plane..BANDS * plane)
            .map(|i| (amp.as_slice()[i] > 0).then(|| sign.as_slice()[i].as_bit()))
            .collect();
        let mut r = Reference {
            cin: l0.in_channels(),
            hidden: l0.out_channels(),
            cout: l1.out_channels(),
            w,
            h,
            input,
            w0: l0.kernels().to_vec(),
            b0: l0.biases().to_vec(),
            w1: l1.kernels().to_vec(),
            b1: l1.biases().to_vec(),
            pre0: vec![],
            act0: vec![],
            pre1: vec![],
            labels,
            norm: 1.0 / (plane * 64) as f64,
        };
        r.pre0 = conv(&r.input, &r.w0, &r.b0, r.cin, r.hidden, w, h);
        r.act0 = r.pre0.iter().map(|&p| p.max(0.0)).collect();
        r.pre1 = conv(&r.act0, &r.w1, &r.b1, r.hidden, r.cout, w, h);
        r
    }

    pub fn loss(&self) -> f64 {
        self.pre1
            .iter()
            .zip(&self.labels)
            .map(|(&z, &l)| term(z, l))
            .sum::<f64>()
            * self.norm
    }

    /// Smallest |pre-activation| of the hidden layer; finite differences are
    /// only valid when this exceeds the largest perturbation applied to it.
    pub fn kink_margin(&self) -> f64 {
        self.pre0.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()))
    }

    pub fn max_input(&self) -> f64 {
        self.input.iter().fold(0.0, |m, &x| m.max(x))
    }

    fn at(v: &[f64], c: usize, y: isize, x: isize, w: usize, h: usize) -> f64 {
        if y < 0 || x < 0 || y as usize >= h || x as usize >= w {
            0.0
        } else {
            v[(c * h + y as usize) * w + x as usize]
        }
    }

    /// Loss change from adding `dz[c][y][x]` to the output pre-activations.
    fn output_delta(&self, dz: &[(usize, f64)]) -> f64 {
        dz.iter()
            .map(|&(i, d)| {
                let l = self.labels[i];
                if l.is_none() || d == 0.0 {
                    0.0
                } else {
                    term(self.pre1[i] + d, l) - term(self.pre1[i], l)
                }
            })
            .sum::<f64>()
            * self.norm
    }

    /// Loss change when hidden channel `o` pre-activations move by `dpre`.
    fn hidden_delta(&self, o: usize, dpre: &[f64]) -> f64 {
        let (w, h) = (self.w, self.h);
        let plane = w * h;
        let base = o * plane;
        let dact: Vec<f64> = (0..plane)
            .map(|p| (self.pre0[base + p] + dpre[p]).max(0.0) - self.act0[base + p])
            .collect();
        let mut dz = Vec::with_capacity(self.cout * plane);
        for c in 0..self.cout {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut s = 0.0;
                    for ky in 0..K {
                        for kx in 0..K {
                            let a =
                                Self::at(&dact, 0, y + ky as isize - 1, x + kx as isize - 1, w, h);
                            if a != 0.0 {
                                s += self.w1[((c * self.hidden + o) * K + ky) * K + kx] * a;
                            }
                        }
                    }
                    dz.push(((c * h + y as usize) * w + x as usize, s));
                }
            }
        }
        self.output_delta(&dz)
    }

    fn central(&self, step: f64, f: impl Fn(f64) -> f64) -> f64 {
        (f(step) - f(-step)) / (2.0 * step)
    }

    /// Numerical gradients ordered as the library orders parameters:
    /// layer 0 kernels, layer 0 biases, layer 1 kernels, layer 1 biases.
    pub fn numerical_gradients(&self, step: f64) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let plane = w * h;
        let mut out = Vec::new();
        for o in 0..self.hidden {
            for i in 0..self.cin {
                for ky in 0..K {
                    for kx in 0..K {
                        let shifted: Vec<f64> = (0..plane)
                            .map(|p| {
                                let (y, x) = ((p / w) as isize, (p % w) as isize);
                                Self::at(
                                    &self.input,
                                    i,
                                    y + ky as isize - 1,
                                    x + kx as isize - 1,
                                    w,
                                    h,
                                )
                            })
                            .collect();
                        out.push(self.central(step, |s| {
                            let d: Vec<f64> = shifted.iter().map(|&x| s * x).collect();
                            self.hidden_delta(o, &d)
                        }));
                    }
                }
            }
        }
        for o in 0..self.hidden {
            out.push(self.central(step, |s| self.hidden_delta(o, &vec![s; plane])));
        }
        for c in 0..self.cout {
            for o in 0..self.hidden {
                for ky in 0..K {
                    for kx in 0..K {
                        out.push(self.central(step, |s| {
                            let dz: Vec<(usize, f64)> = (0..plane)
                                .map(|p| {
                                    let (y, x) = ((p / w) as isize, (p % w) as isize);
                                    let a = Self::at(
                                        &self.act0,
                                        o,
                                        y + ky as isize - 1,
                                        x + kx as isize - 1,
                                        w,
                                        h,
                                    );
                                    (c * plane + p, s * a)
                                })
                                .collect();
                            self.output_delta(&dz)
                        }));
                    }
                }
            }
        }
        for c in 0..self.cout {
            out.push(self.central(step, |s| {
                let dz: Vec<(usize, f64)> = (0..plane).map(|p| (c * plane + p, s)).collect();
                self.output_delta(&dz)
            }));
        }
        out
    }
}

fn conv(
    input: &[f64],
    wts: &[f64],
    bias: &[f64],
    cin: usize,
    cout: usize,
    w: usize,
    h: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; cout * w * h];
    for o in 0..cout {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut s = bias[o];
                for i in 0..cin {
                    for ky in 0..K {
                        for kx in 0..K {
                            s += wts[((o * cin + i) * K + ky) * K + kx]
                                * Reference::at(
                                    input,
                                    i,
                                    y + ky as isize - 1,
                                    x + kx as isize - 1,
                                    w,
                                    h,
                                );
                        }
                    }
                }
                out[(o * h + y as usize) * w + x as usize] = s;
            }
        }
    }
    out
}

/// `|a - n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}
