//! Brute-force reference implementations.
//!
//! Everything here works on plain slices with explicit nested loops and shares
//! no code with `vcod-core`. Tests compare the optimized kernels against these.

/// Row-major `c×h×w` image.
#[derive(Clone, Debug)]
pub struct Img {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub v: Vec<f64>,
}

impl Img {
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.v[(c * self.h + y) * self.w + x]
    }
}

pub fn max_pool(x: &Img, k: usize, s: usize) -> Img {
    let ho = (x.h - k) / s + 1;
    let wo = (x.w - k) / s + 1;
    let mut v = Vec::new();
    for c in 0..x.c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..k {
                    for dx in 0..k {
                        m = m.max(x.at(c, oy * s + dy, ox * s + dx));
                    }
                }
                v.push(m);
            }
        }
    }
    Img {
        c: x.c,
        h: ho,
        w: wo,
        v,
    }
}

/// Bilinear value of channel `c` at `(px, py)` after clamping to the image.
pub fn bilinear(x: &Img, c: usize, px: f64, py: f64) -> f64 {
    let px = px.max(0.0).min((x.w - 1) as f64);
    let py = py.max(0.0).min((x.h - 1) as f64);
    let mut acc = 0.0;
    // Sum over the integer lattice points whose tent kernel covers (px, py).
    for y in 0..x.h {
        for xx in 0..x.w {
            let wy = 1.0 - (py - y as f64).abs();
            let wx = 1.0 - (px - xx as f64).abs();
            if wy > 0.0 && wx > 0.0 {
                acc += wy * wx * x.at(c, y, xx);
            }
        }
    }
    acc
}

/// Cross-correlation with zero padding; kernel `o×c×kh×kw`.
pub fn conv(x: &Img, k: &[f64], o: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> Img {
    let ho = (x.h + 2 * pad - kh) / stride + 1;
    let wo = (x.w + 2 * pad - kw) / stride + 1;
    let mut v = vec![0.0; o * ho * wo];
    for oc in 0..o {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for ic in 0..x.c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pad as i64;
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if iy < 0 || ix < 0 || iy >= x.h as i64 || ix >= x.w as i64 {
                                continue;
                            }
                            acc += k[((oc * x.c + ic) * kh + ky) * kw + kx] * x.at(ic, iy as usize, ix as usize);
                        }
                    }
                }
                v[(oc * ho + oy) * wo + ox] = acc;
            }
        }
    }
    Img { c: o, h: ho, w: wo, v }
}

/// Raw correlation `exp(<f_ref[:,x,y], f_nbr[:,u,v]>)` laid out as
/// `[(x·W_r + y)·(H_n·W_n) + u·W_n + v]`.
pub fn correlation(r: &Img, n: &Img) -> Vec<f64> {
    let mut out = Vec::new();
    for x in 0..r.h {
        for y in 0..r.w {
            for u in 0..n.h {
                for v in 0..n.w {
                    let mut s = 0.0;
                    for c in 0..r.c {
                        s += r.at(c, x, y) * n.at(c, u, v);
                    }
                    out.push(s.exp());
                }
            }
        }
    }
    out
}

pub fn normalize(vol: &[f64], slice: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(vol.len());
    for row in vol.chunks(slice) {
        let mut s = 0.0;
        for &v in row {
            s += v;
        }
        for &v in row {
            out.push(v / s);
        }
    }
    out
}

/// Dense matrix product `[P_r×P_n] · [P_n×C]`, returned as `C×P_r`.
pub fn aggregate(vol_n: &[f64], g: &Img) -> Vec<f64> {
    let pn = g.h * g.w;
    let pr = vol_n.len() / pn;
    // g as a P_n×C matrix
    let mut gm = vec![0.0; pn * g.c];
    for c in 0..g.c {
        for q in 0..pn {
            gm[q * g.c + c] = g.v[c * pn + q];
        }
    }
    let mut prod = vec![0.0; pr * g.c];
    for p in 0..pr {
        for c in 0..g.c {
            let mut acc = 0.0;
            for q in 0..pn {
                acc += vol_n[p * pn + q] * gm[q * g.c + c];
            }
            prod[p * g.c + c] = acc;
        }
    }
    let mut out = vec![0.0; g.c * pr];
    for p in 0..pr {
        for c in 0..g.c {
            out[c * pr + p] = prod[p * g.c + c];
        }
    }
    out
}

/// Central finite differences of a scalar function.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + step;
            let up = f(&buf);
            buf[i] = x[i] - step;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Relative error with a small absolute floor so that exact zeros compare.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Integer translation of an `h×w` mask by `(dx, dy)`, zero filled.
pub fn shift(mask: &[f64], h: usize, w: usize, dx: i64, dy: i64) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (sy, sx) = (y - dy, x - dx);
            if sy >= 0 && sx >= 0 && sy < h as i64 && sx < w as i64 {
                out[(y * w as i64 + x) as usize] = mask[(sy * w as i64 + sx) as usize];
            }
        }
    }
    out
}

pub mod metrics {
    //! Segmentation measures written straight from their defining formulas.

    const EPS: f64 = f64::EPSILON;

    pub fn mae(p: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            s += (p[i] - g[i]).abs();
        }
        s / p.len() as f64
    }

    fn threshold(t: usize) -> f64 {
        t as f64 / 255.0
    }

    pub fn mean_dice(p: &[f64], g: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in 0..256 {
            let (mut inter, mut np, mut ng) = (0.0, 0.0, 0.0);
            for i in 0..p.len() {
                let a = p[i] > threshold(t);
                let b = g[i] > 0.5;
                if a && b {
                    inter += 1.0;
                }
                if a {
                    np += 1.0;
                }
                if b {
                    ng += 1.0;
                }
            }
            total += if np + ng == 0.0 { 1.0 } else { 2.0 * inter / (np + ng) };
        }
        total / 256.0
    }

    pub fn mean_iou(p: &[f64], g: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in 0..256 {
            let (mut inter, mut uni) = (0.0, 0.0);
            for i in 0..p.len() {
                let a = p[i] > threshold(t);
                let b = g[i] > 0.5;
                if a && b {
                    inter += 1.0;
                }
                if a || b {
                    uni += 1.0;
                }
            }
            total += if uni == 0.0 { 1.0 } else { inter / uni };
        }
        total / 256.0
    }

    /// Enhanced alignment of a (possibly continuous) map against a binary gt,
    /// averaged over pixels.
    pub fn enhanced_alignment(p: &[f64], g: &[f64]) -> f64 {
        let n = p.len() as f64;
        let gsum: f64 = g.iter().sum();
        if gsum == 0.0 {
            return p.iter().map(|v| 1.0 - v).sum::<f64>() / n;
        }
        if gsum == n {
            return p.iter().sum::<f64>() / n;
        }
        let mp = p.iter().sum::<f64>() / n;
        let mg = gsum / n;
        let mut s = 0.0;
        for i in 0..p.len() {
            let a = p[i] - mp;
            let b = g[i] - mg;
            let align = 2.0 * a * b / (a * a + b * b + EPS);
            s += (align + 1.0) * (align + 1.0) / 4.0;
        }
        s / n
    }

    pub fn mean_e_measure(p: &[f64], g: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in 0..256 {
            let bin: Vec<f64> = p.iter().map(|&v| if v > threshold(t) { 1.0 } else { 0.0 }).collect();
            total += enhanced_alignment(&bin, g);
        }
        total / 256.0
    }

    fn mean_std(vals: &[f64]) -> (f64, f64) {
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        if vals.len() < 2 {
            return (m, 0.0);
        }
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    }

    fn ssim(p: &[f64], g: &[f64]) -> f64 {
        let n = p.len() as f64;
        let x = p.iter().sum::<f64>() / n;
        let y = g.iter().sum::<f64>() / n;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        if p.len() > 1 {
            for i in 0..p.len() {
                sx += (p[i] - x) * (p[i] - x);
                sy += (g[i] - y) * (g[i] - y);
                sxy += (p[i] - x) * (g[i] - y);
            }
            sx /= n - 1.0;
            sy /= n - 1.0;
            sxy /= n - 1.0;
        }
        let alpha = 4.0 * x * y * sxy;
        let beta = (x * x + y * y) * (sx + sy);
        if alpha != 0.0 {
            alpha / (beta + EPS)
        } else if beta == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn s_measure(p: &[f64], g: &[f64], h: usize, w: usize) -> f64 {
        let n = (h * w) as f64;
        let gm = g.iter().sum::<f64>() / n;
        if gm == 0.0 {
            return 1.0 - p.iter().sum::<f64>() / n;
        }
        if gm == 1.0 {
            return p.iter().sum::<f64>() / n;
        }
        // object-aware
        let fg: Vec<f64> = (0..p.len()).filter(|&i| g[i] > 0.5).map(|i| p[i]).collect();
        let bg: Vec<f64> = (0..p.len()).filter(|&i| g[i] <= 0.5).map(|i| 1.0 - p[i]).collect();
        let score = |vals: &[f64]| {
            let (m, s) = mean_std(vals);
            2.0 * m / (m * m + 1.0 + s + EPS)
        };
        let object = gm * score(&fg) + (1.0 - gm) * score(&bg);

        // region-aware: the split line passes through the centroid, which sits
        // at sx/cnt on pixel-centre coordinates

        let (mut sy, mut sx, mut cnt) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                if g[y * w + x] > 0.5 {
                    sy += y as f64;
                    sx += x as f64;
                    cnt += 1.0;
                }
            }
        }
        // nearest grid line to centroid + 0.5, ties to the even line
        let line = |c: f64, n: usize| {
            let mut best = 0;
            for s in 1..=n {
                let (d, db) = ((s as f64 - c - 0.5).abs(), (best as f64 - c - 0.5).abs());
                if d < db || (d == db && s % 2 == 0) {
                    best = s;
                }
            }
            best
        };
        let cx = line(sx / cnt, w);
        let cy = line(sy / cnt, h);
        let quads = [(0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)];
        let mut region = 0.0;
        for (y0, y1, x0, x1) in quads {
            if y1 <= y0 || x1 <= x0 {
                continue;
            }
            let mut pp = Vec::new();
            let mut gg = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    pp.push(p[y * w + x]);
                    gg.push(g[y * w + x]);
                }
            }
            let weight = ((y1 - y0) * (x1 - x0)) as f64 / n;
            region += weight * ssim(&pp, &gg);
        }
        (0.5 * object + 0.5 * region).max(0.0)
    }

    /// Weighted F-measure with β² = 1, 7×7 Gaussian (σ = 5) dependency term and
    /// the distance-decayed importance term. A background pixel takes the mean
    /// error of all foreground pixels at the minimum distance.
    pub fn weighted_f(p: &[f64], g: &[f64], h: usize, w: usize) -> f64 {
        let gsum: f64 = g.iter().sum();
        if gsum == 0.0 {
            return 0.0;
        }
        let e: Vec<f64> = (0..p.len()).map(|i| (p[i] - g[i]).abs()).collect();
        let mut et = e.clone();
        let mut dist = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                if g[y * w + x] > 0.5 {
                    continue;
                }
                let mut best = i64::MAX;
                for yy in 0..h {
                    for xx in 0..w {
                        if g[yy * w + xx] > 0.5 {
                            let d = (yy as i64 - y as i64).pow(2) + (xx as i64 - x as i64).pow(2);
                            best = best.min(d);
                        }
                    }
                }
                let (mut sum, mut cnt) = (0.0, 0.0);
                for yy in 0..h {
                    for xx in 0..w {
                        let d = (yy as i64 - y as i64).pow(2) + (xx as i64 - x as i64).pow(2);
                        if g[yy * w + xx] > 0.5 && d == best {
                            sum += e[yy * w + xx];
                            cnt += 1.0;
                        }
                    }
                }
                dist[y * w + x] = (best as f64).sqrt();
                et[y * w + x] = sum / cnt;
            }
        }
        // normalized Gaussian
        let sigma: f64 = 5.0;
        let mut k = [[0.0; 7]; 7];
        let mut ks = 0.0;
        for (i, row) in k.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (a, b) = (i as f64 - 3.0, j as f64 - 3.0);
                *v = (-(a * a + b * b) / (2.0 * sigma * sigma)).exp();
                ks += *v;
            }
        }
        let mut ea = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for i in 0..7 {
                    for j in 0..7 {
                        let yy = y as i64 + i as i64 - 3;
                        let xx = x as i64 + j as i64 - 3;
                        if yy >= 0 && xx >= 0 && yy < h as i64 && xx < w as i64 {
                            acc += k[i][j] / ks * et[yy as usize * w + xx as usize];
                        }
                    }
                }
                ea[y * w + x] = acc;
            }
        }
        let (mut tpw, mut fpw, mut fg_err, mut nfg) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..h * w {
            if g[i] > 0.5 {
                let m = if ea[i] < e[i] { ea[i] } else { e[i] };
                fg_err += m;
                nfg += 1.0;
            } else {
                let b = 2.0 - ((0.5f64).ln() / 5.0 * dist[i]).exp();
                fpw += e[i] * b;
            }
        }
        tpw += gsum - fg_err;
        let r = 1.0 - fg_err / nfg;
        let pr = tpw / (tpw + fpw + EPS);
        2.0 * r * pr / (r + pr + EPS)
    }
}

pub mod losses {
    pub fn pixel_weights(g: &[f64], h: usize, w: usize, window: usize, lambda: f64) -> Vec<f64> {
        let r = (window / 2) as i64;
        let mut out = vec![0.0; h * w];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let (mut s, mut n) = (0.0, 0.0);
                for yy in y - r..=y + r {
                    for xx in x - r..=x + r {
                        if yy >= 0 && xx >= 0 && yy < h as i64 && xx < w as i64 {
                            s += g[(yy * w as i64 + xx) as usize];
                            n += 1.0;
                        }
                    }
                }
                let i = (y * w as i64 + x) as usize;
                out[i] = 1.0 + lambda * (s / n - g[i]).abs();
            }
        }
        out
    }

    pub fn weighted_ce(p: &[f64], g: &[f64], w: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..p.len() {
            let q = p[i].clamp(1e-7, 1.0 - 1e-7);
            num += w[i] * (-g[i] * q.ln() - (1.0 - g[i]) * (1.0 - q).ln());
            den += w[i];
        }
        num / den
    }

    pub fn weighted_iou(p: &[f64], g: &[f64], w: &[f64]) -> f64 {
        let (mut inter, mut uni) = (0.0, 0.0);
        for i in 0..p.len() {
            inter += w[i] * p[i] * g[i];
            uni += w[i] * (p[i] + g[i] - p[i] * g[i]);
        }
        1.0 - (inter + 1.0) / (uni + 1.0)
    }
}
