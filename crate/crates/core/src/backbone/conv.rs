use rand::Rng;
use rand_distr::{Distribution, Normal};

/// 3×3 "same" convolution over a channels-last `H × W × C` feature map.
/// Weights are laid out `[ky][kx][in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) struct ConvGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

impl Conv3x3 {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            weights: vec![0.0; 9 * in_ch * out_ch],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn he_init<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (2.0 / (9 * in_ch) as f64).sqrt()).unwrap();
        Self {
            in_ch,
            out_ch,
            weights: (0..9 * in_ch * out_ch).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; out_ch],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (ci, co) = (self.in_ch, self.out_ch);
        let mut out = vec![0.0; h * w * co];
        for y in 0..h {
            for x in 0..w {
                let o = &mut out[(y * w + x) * co..(y * w + x + 1) * co];
                o.copy_from_slice(&self.bias);
                for ky in 0..3 {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = x as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let px = &input[(iy as usize * w + ix as usize) * ci..][..ci];
                        let wk = &self.weights[(ky * 3 + kx) * ci * co..][..ci * co];
                        for (c, &a) in px.iter().enumerate() {
                            if a == 0.0 {
                                continue;
                            }
                            for (ov, wv) in o.iter_mut().zip(&wk[c * co..(c + 1) * co]) {
                                *ov += a * wv;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub(crate) fn backward(&self, input: &[f64], h: usize, w: usize, upstream: &[f64], need_input: bool) -> ConvGrads {
        let (ci, co) = (self.in_ch, self.out_ch);
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; co];
        let mut dx = need_input.then(|| vec![0.0; h * w * ci]);
        for y in 0..h {
            for x in 0..w {
                let g = &upstream[(y * w + x) * co..][..co];
                for (b, gv) in db.iter_mut().zip(g) {
                    *b += gv;
                }
                for ky in 0..3 {
                    let iy = y as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = x as isize + kx as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * ci;
                        let k = (ky * 3 + kx) * ci * co;
                        for c in 0..ci {
                            let a = input[base + c];
                            let wrow = &self.weights[k + c * co..][..co];
                            let dwrow = &mut dw[k + c * co..][..co];
                            let mut acc = 0.0;
                            for ((dwv, wv), gv) in dwrow.iter_mut().zip(wrow).zip(g) {
                                *dwv += a * gv;
                                acc += wv * gv;
                            }
                            if let Some(dx) = dx.as_mut() {
                                dx[base + c] += acc;
                            }
                        }
                    }
                }
            }
        }
        ConvGrads {
            weights: dw,
            bias: db,
            input: dx,
        }
    }
}

/// 2×2 average pooling with stride 2; a trailing odd row or column is dropped.
pub(crate) fn avg_pool2(input: &[f64], h: usize, w: usize, c: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow * c];
    for y in 0..oh {
        for x in 0..ow {
            let o = &mut out[(y * ow + x) * c..][..c];
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let src = &input[((2 * y + dy) * w + 2 * x + dx) * c..][..c];
                for (ov, s) in o.iter_mut().zip(src) {
                    *ov += 0.25 * s;
                }
            }
        }
    }
    (out, oh, ow)
}

pub(crate) fn avg_pool2_backward(upstream: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = vec![0.0; h * w * c];
    for y in 0..oh {
        for x in 0..ow {
            let g = &upstream[(y * ow + x) * c..][..c];
            for (dy, ddx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let dst = &mut dx[((2 * y + dy) * w + 2 * x + ddx) * c..][..c];
                for (d, gv) in dst.iter_mut().zip(g) {
                    *d += 0.25 * gv;
                }
            }
        }
    }
    dx
}
