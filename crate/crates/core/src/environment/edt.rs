//! Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher),
//! separable over the three grid axes. Distances are in voxel units.

const INF: f64 = 1e20;

/// Squared distance from every voxel center to the nearest `true` voxel.
/// Returns `INF`-like values when the grid contains no seeds.
pub fn squared_edt(seeds: &[bool], dims: [usize; 3]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut d: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { INF }).collect();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Scratch::new(longest);

    // x lines
    for k in 0..nz {
        for j in 0..ny {
            let base = nx * (j + ny * k);
            line[..nx].copy_from_slice(&d[base..base + nx]);
            transform_1d(&line[..nx], &mut out[..nx], &mut scratch);
            d[base..base + nx].copy_from_slice(&out[..nx]);
        }
    }
    // y lines
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                line[j] = d[i + nx * (j + ny * k)];
            }
            transform_1d(&line[..ny], &mut out[..ny], &mut scratch);
            for j in 0..ny {
                d[i + nx * (j + ny * k)] = out[j];
            }
        }
    }
    // z lines
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                line[k] = d[i + nx * (j + ny * k)];
            }
            transform_1d(&line[..nz], &mut out[..nz], &mut scratch);
            for k in 0..nz {
                d[i + nx * (j + ny * k)] = out[k];
            }
        }
    }
    d
}

struct Scratch {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }
}

/// Lower envelope of parabolas rooted at `(q, f[q])`; sites with infinite
/// `f` never touch the envelope and are skipped.
fn transform_1d(f: &[f64], out: &mut [f64], s: &mut Scratch) {
    let n = f.len();
    let (v, z) = (&mut s.v, &mut s.z);
    let mut k: usize = 0;
    let mut any = false;
    for q in 0..n {
        if f[q] >= INF {
            continue;
        }
        if !any {
            any = true;
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        let qf = q as f64;
        let mut inter;
        loop {
            let p = v[k] as f64;
            inter = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if inter <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = inter;
        z[k + 1] = f64::INFINITY;
    }
    if !any {
        out.iter_mut().for_each(|o| *o = INF);
        return;
    }
    let mut k = 0usize;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *slot = (qf - p) * (qf - p) + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(seeds: &[bool], dims: [usize; 3]) -> Vec<f64> {
        let [nx, ny, nz] = dims;
        let pts: Vec<(i64, i64, i64)> = (0..seeds.len())
            .filter(|&i| seeds[i])
            .map(|i| ((i % nx) as i64, ((i / nx) % ny) as i64, (i / (nx * ny)) as i64))
            .collect();
        (0..nx * ny * nz)
            .map(|i| {
                let (x, y, z) = ((i % nx) as i64, ((i / nx) % ny) as i64, (i / (nx * ny)) as i64);
                pts.iter()
                    .map(|&(a, b, c)| ((x - a).pow(2) + (y - b).pow(2) + (z - c).pow(2)) as f64)
                    .fold(INF, f64::min)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let dims = [rng.gen_range(1..9), rng.gen_range(1..9), rng.gen_range(1..9)];
            let n = dims[0] * dims[1] * dims[2];
            let seeds: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.08)).collect();
            if !seeds.iter().any(|&s| s) {
                continue;
            }
            assert_eq!(squared_edt(&seeds, dims), brute(&seeds, dims));
        }
    }
}
