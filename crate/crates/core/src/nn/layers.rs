//! Conv / pool kernels on `(channels, height, width)` tensors stored
//! row-major. Height is the electrode axis, width is time.

/// Dense 3-D activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f64] {
        let o = (c * self.h + y) * self.w;
        &self.data[o..o + self.w]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [f64] {
        let o = (c * self.h + y) * self.w;
        &mut self.data[o..o + self.w]
    }
}

/// Convolution geometry; weights are `[out][in][kh][kw]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kh * self.kw
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_ch + i) * self.kh + ky) * self.kw + kx
    }
}

/// "Same" padding: `(k-1)/2` zeros before, the rest after.
#[inline]
pub fn pad_before(k: usize) -> usize {
    (k - 1) / 2
}

/// Output rows `y` and columns `x` for which tap `(ky, kx)` reads inside the
/// input: returns `(out_start, in_start, len)` along one axis.
#[inline]
fn overlap(n: usize, k: usize, tap: usize) -> Option<(usize, usize, usize)> {
    let p = pad_before(k) as isize;
    let shift = tap as isize - p; // input index = out index + shift
    let start = (-shift).max(0) as usize;
    let end = (n as isize - shift).min(n as isize);
    (end > start as isize).then(|| (start, (start as isize + shift) as usize, end as usize - start))
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Same-padded convolution followed by the bias.
pub fn conv_forward(s: &ConvShape, w: &[f64], b: &[f64], x: &Tensor3) -> Tensor3 {
    let mut y = Tensor3::zeros(s.out_ch, x.h, x.w);
    for o in 0..s.out_ch {
        for yy in 0..x.h {
            y.row_mut(o, yy).fill(b[o]);
        }
        for i in 0..s.in_ch {
            for ky in 0..s.kh {
                let Some((oy, iy, ny)) = overlap(x.h, s.kh, ky) else { continue };
                for kx in 0..s.kw {
                    let Some((ox, ix, nx)) = overlap(x.w, s.kw, kx) else { continue };
                    let wv = w[s.widx(o, i, ky, kx)];
                    for r in 0..ny {
                        let src = &x.row(i, iy + r)[ix..ix + nx];
                        axpy(wv, src, &mut y.row_mut(o, oy + r)[ox..ox + nx]);
                    }
                }
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients and returns the input gradient.
pub fn conv_backward(s: &ConvShape, w: &[f64], x: &Tensor3, dy: &Tensor3, dw: &mut [f64], db: &mut [f64]) -> Tensor3 {
    let mut dx = Tensor3::zeros(s.in_ch, x.h, x.w);
    for o in 0..s.out_ch {
        db[o] += dy.data[o * x.h * x.w..(o + 1) * x.h * x.w].iter().sum::<f64>();
        for i in 0..s.in_ch {
            for ky in 0..s.kh {
                let Some((oy, iy, ny)) = overlap(x.h, s.kh, ky) else { continue };
                for kx in 0..s.kw {
                    let Some((ox, ix, nx)) = overlap(x.w, s.kw, kx) else { continue };
                    let k = s.widx(o, i, ky, kx);
                    let mut acc = 0.0;
                    for r in 0..ny {
                        let g = &dy.row(o, oy + r)[ox..ox + nx];
                        acc += dot(g, &x.row(i, iy + r)[ix..ix + nx]);
                        axpy(w[k], g, &mut dx.row_mut(i, iy + r)[ix..ix + nx]);
                    }
                    dw[k] += acc;
                }
            }
        }
    }
    dx
}

pub fn relu_inplace(t: &mut Tensor3) {
    t.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Max-pool with a `(ph, pw)` window and equal stride, floor division.
/// Returns the output and, per output element, the flat input index of the
/// maximum (first occurrence on ties).
pub fn maxpool_forward(x: &Tensor3, ph: usize, pw: usize) -> (Tensor3, Vec<usize>) {
    let (oh, ow) = (x.h / ph, x.w / pw);
    let mut y = Tensor3::zeros(x.c, oh, ow);
    let mut arg = vec![0usize; x.c * oh * ow];
    for c in 0..x.c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0;
                for dy in 0..ph {
                    let base = (c * x.h + oy * ph + dy) * x.w + ox * pw;
                    for (j, &v) in x.data[base..base + pw].iter().enumerate() {
                        if v > best {
                            best = v;
                            bi = base + j;
                        }
                    }
                }
                let k = (c * oh + oy) * ow + ox;
                y.data[k] = best;
                arg[k] = bi;
            }
        }
    }
    (y, arg)
}

pub fn maxpool_backward(x_shape: (usize, usize, usize), arg: &[usize], dy: &Tensor3) -> Tensor3 {
    let mut dx = Tensor3::zeros(x_shape.0, x_shape.1, x_shape.2);
    for (&i, &g) in arg.iter().zip(&dy.data) {
        dx.data[i] += g;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the same-padded convolution.
    fn naive(s: &ConvShape, w: &[f64], b: &[f64], x: &Tensor3) -> Tensor3 {
        let mut y = Tensor3::zeros(s.out_ch, x.h, x.w);
        let (ph, pw) = (pad_before(s.kh) as isize, pad_before(s.kw) as isize);
        for o in 0..s.out_ch {
            for yy in 0..x.h {
                for xx in 0..x.w {
                    let mut acc = b[o];
                    for i in 0..s.in_ch {
                        for ky in 0..s.kh {
                            for kx in 0..s.kw {
                                let (iy, ix) = (yy as isize + ky as isize - ph, xx as isize + kx as isize - pw);
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.h && (ix as usize) < x.w {
                                    acc += w[s.widx(o, i, ky, kx)] * x.row(i, iy as usize)[ix as usize];
                                }
                            }
                        }
                    }
                    y.row_mut(o, yy)[xx] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_sum() {
        let x = Tensor3 { c: 2, h: 3, w: 11, data: (0..66).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect() };
        for (kh, kw) in [(1, 4), (1, 5), (4, 1), (5, 1), (16, 1), (2, 3)] {
            let s = ConvShape { out_ch: 3, in_ch: 2, kh, kw };
            let w: Vec<f64> = (0..s.weight_len()).map(|i| ((i * 31) % 7) as f64 * 0.5 - 1.5).collect();
            let b = [0.25, -1.0, 2.0];
            assert_eq!(conv_forward(&s, &w, &b, &x), naive(&s, &w, &b, &x), "{kh}x{kw}");
        }
    }

    #[test]
    fn pool_floor_and_ties() {
        let x = Tensor3 { c: 1, h: 1, w: 7, data: vec![1.0, 3.0, 3.0, 0.0, 0.0, 0.0, 9.0] };
        let (y, arg) = maxpool_forward(&x, 1, 3);
        assert_eq!(y.data, vec![3.0, 0.0]);
        assert_eq!(arg, vec![1, 3]);
        let dx = maxpool_backward(x.shape(), &arg, &Tensor3 { c: 1, h: 1, w: 2, data: vec![1.0, 1.0] });
        assert_eq!(dx.data.iter().filter(|&&g| g != 0.0).count(), 2);
    }
}
