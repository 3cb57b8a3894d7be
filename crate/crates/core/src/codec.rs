//! The SRKRP code: random sparse coding vectors, the row-wise Khatri-Rao
//! generator matrix, block encoding, and least-squares decoding with block
//! reassembly.
//!
//! Nodes are indexed from 0. Workers are `0..N`, the master's local
//! computations are `N..N+R`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{self, DenseMatrix, Matrix, PivotedQr, RankTolerance};
use crate::weights::{CoefficientDistribution, WeightDistribution};
use crate::{Error, Result};

/// Every parameter of one coded multiplication `C = AᵀB`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Shared row count of `A` and `B`.
    pub r: usize,
    /// Columns of `A`.
    pub s: usize,
    /// Columns of `B`.
    pub t: usize,
    /// Number of column blocks of `A`.
    pub m: usize,
    /// Number of column blocks of `B`.
    pub n: usize,
    /// `N`, number of workers.
    pub workers: usize,
    /// `S`, number of workers whose results are erased.
    pub stragglers: usize,
    /// `R`, extra products the master computes itself.
    pub extra: usize,
    pub worker_u: WeightDistribution,
    pub worker_v: WeightDistribution,
    pub master_u: WeightDistribution,
    pub master_v: WeightDistribution,
    pub coeff: CoefficientDistribution,
}

impl SystemConfig {
    /// Dense (`x^m`, `x^n`) code with no extra computations and the smallest
    /// input shape compatible with the split (`r = 1, s = m, t = n`).
    pub fn new(m: usize, n: usize, workers: usize, stragglers: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param("m/n", "split counts must be positive"));
        }
        let cfg = Self {
            r: 1,
            s: m,
            t: n,
            m,
            n,
            workers,
            stragglers,
            extra: 0,
            worker_u: WeightDistribution::dense(m)?,
            worker_v: WeightDistribution::dense(n)?,
            master_u: WeightDistribution::dense(m)?,
            master_v: WeightDistribution::dense(n)?,
            coeff: CoefficientDistribution::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_shape(mut self, r: usize, s: usize, t: usize) -> Self {
        self.r = r;
        self.s = s;
        self.t = t;
        self
    }

    pub fn with_worker_dists(mut self, u: WeightDistribution, v: WeightDistribution) -> Self {
        self.worker_u = u;
        self.worker_v = v;
        self
    }

    pub fn with_extra(mut self, extra: usize, u: WeightDistribution, v: WeightDistribution) -> Self {
        self.extra = extra;
        self.master_u = u;
        self.master_v = v;
        self
    }

    pub fn with_coeff(mut self, coeff: CoefficientDistribution) -> Self {
        self.coeff = coeff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::param("m/n", "split counts must be positive"));
        }
        if self.r == 0 || self.s == 0 || self.t == 0 {
            return Err(Error::param("r/s/t", "input dimensions must be positive"));
        }
        if self.s % self.m != 0 {
            return Err(Error::param(
                "m",
                format!("m = {} does not divide s = {}", self.m, self.s),
            ));
        }
        if self.t % self.n != 0 {
            return Err(Error::param(
                "n",
                format!("n = {} does not divide t = {}", self.n, self.t),
            ));
        }
        if self.k() > self.workers {
            return Err(Error::param(
                "workers",
                format!("K = mn = {} exceeds N = {}", self.k(), self.workers),
            ));
        }
        if self.stragglers > self.workers {
            return Err(Error::param(
                "stragglers",
                format!("S = {} exceeds N = {}", self.stragglers, self.workers),
            ));
        }
        for (name, dist, want) in [
            ("worker_udist", &self.worker_u, self.m),
            ("worker_vdist", &self.worker_v, self.n),
            ("master_udist", &self.master_u, self.m),
            ("master_vdist", &self.master_v, self.n),
        ] {
            if dist.max_weight() != want {
                return Err(Error::param(
                    name,
                    format!("max weight {} does not match {want}", dist.max_weight()),
                ));
            }
        }
        Ok(())
    }

    /// `K = mn`, the number of block products to recover.
    pub fn k(&self) -> usize {
        self.m * self.n
    }

    /// `N − S`.
    pub fn survivors(&self) -> usize {
        self.workers - self.stragglers
    }

    /// Rows of the generator matrix, `N − S + R`.
    pub fn generator_rows(&self) -> usize {
        self.survivors() + self.extra
    }

    /// `w_avg = u_avg·v_avg`, mean nonzeros per worker row of `G`.
    pub fn w_avg(&self) -> f64 {
        self.worker_u.mean() * self.worker_v.mean()
    }

    /// `w*_avg`, mean nonzeros per master row of `G`.
    pub fn w_star_avg(&self) -> f64 {
        self.master_u.mean() * self.master_v.mean()
    }

    /// Shape of each product block `A_iᵀ B_j`.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.s / self.m, self.t / self.n)
    }
}

/// A sparse coding vector: `coeffs[k]` sits at position `support[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingVector {
    length: usize,
    support: Vec<usize>,
    coeffs: Vec<f64>,
}

impl CodingVector {
    /// Builds from explicit `(index, coefficient)` pairs.
    pub fn new(length: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("support", "repeated index"));
        }
        if let Some(e) = entries.iter().find(|e| e.0 >= length) {
            return Err(Error::param(
                "support",
                format!("index {} outside 0..{length}", e.0),
            ));
        }
        if entries.iter().any(|e| e.1 == 0.0 || !e.1.is_finite()) {
            return Err(Error::param("coeffs", "coefficients must be finite and nonzero"));
        }
        let (support, coeffs) = entries.into_iter().unzip();
        Ok(Self {
            length,
            support,
            coeffs,
        })
    }

    /// Unit vector `e_index` of the given length.
    pub fn unit(length: usize, index: usize) -> Result<Self> {
        Self::new(length, alloc::vec![(index, 1.0)])
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Ascending positions of the nonzero coefficients.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.support
            .binary_search(&index)
            .map_or(0.0, |k| self.coeffs[k])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.length];
        for (&i, &c) in self.support.iter().zip(&self.coeffs) {
            v[i] = c;
        }
        v
    }

    fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.coeffs.iter().copied())
    }
}

/// Draws a weight from `wdist`, a uniformly random support of that size,
/// and i.i.d. coefficients from `cdist`.
pub fn draw_coding_vector<R: Rng + ?Sized>(
    length: usize,
    wdist: &WeightDistribution,
    cdist: CoefficientDistribution,
    rng: &mut R,
) -> Result<CodingVector> {
    if wdist.max_weight() > length {
        return Err(Error::param(
            "wdist",
            format!(
                "max weight {} exceeds vector length {length}",
                wdist.max_weight()
            ),
        ));
    }
    let weight = wdist.sample(rng);
    let mut support = rand::seq::index::sample(rng, length, weight).into_vec();
    support.sort_unstable();
    let coeffs = support.iter().map(|_| cdist.sample(rng)).collect();
    Ok(CodingVector {
        length,
        support,
        coeffs,
    })
}

/// A sparse row vector stored as ascending `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub length: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.length];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }
}

/// Kronecker product `p ⊗ q`: position `i·n + j` holds `p_i·q_j`.
pub fn kron_row(p: &CodingVector, q: &CodingVector) -> SparseRow {
    let n = q.length();
    let mut entries = Vec::with_capacity(p.weight() * q.weight());
    for (i, pi) in p.entries() {
        for (j, qj) in q.entries() {
            entries.push((i * n + j, pi * qj));
        }
    }
    SparseRow {
        length: p.length() * n,
        entries,
    }
}

/// Coding vector pairs for all `N` workers and `R` master computations.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeRealization {
    m: usize,
    n: usize,
    workers: Vec<(CodingVector, CodingVector)>,
    masters: Vec<(CodingVector, CodingVector)>,
}

impl CodeRealization {
    /// Draws all `N + R` pairs in node order, independent of which workers
    /// later straggle.
    pub fn draw<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut pair = |u: &WeightDistribution, v: &WeightDistribution| -> Result<_> {
            let p = draw_coding_vector(cfg.m, u, cfg.coeff, rng)?;
            let q = draw_coding_vector(cfg.n, v, cfg.coeff, rng)?;
            Ok((p, q))
        };
        let workers = (0..cfg.workers)
            .map(|_| pair(&cfg.worker_u, &cfg.worker_v))
            .collect::<Result<Vec<_>>>()?;
        let masters = (0..cfg.extra)
            .map(|_| pair(&cfg.master_u, &cfg.master_v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m: cfg.m,
            n: cfg.n,
            workers,
            masters,
        })
    }

    /// An explicit code, e.g. a deterministic one for testing.
    pub fn from_vectors(
        m: usize,
        n: usize,
        workers: Vec<(CodingVector, CodingVector)>,
        masters: Vec<(CodingVector, CodingVector)>,
    ) -> Result<Self> {
        for (p, q) in workers.iter().chain(&masters) {
            if p.length() != m || q.length() != n {
                return Err(Error::Shape {
                    op: "CodeRealization::from_vectors",
                    left: (m, n),
                    right: (p.length(), q.length()),
                });
            }
        }
        Ok(Self {
            m,
            n,
            workers,
            masters,
        })
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn num_masters(&self) -> usize {
        self.masters.len()
    }

    /// Coding pair of node `id` (workers first, then master computations).
    pub fn pair(&self, id: usize) -> &(CodingVector, CodingVector) {
        if id < self.workers.len() {
            &self.workers[id]
        } else {
            &self.masters[id - self.workers.len()]
        }
    }

    /// Generator rows for the given surviving workers followed by every
    /// master computation.
    pub fn assemble(&self, survivors: &[usize]) -> Result<GeneratorMatrix> {
        let mut node_ids = survivors.to_vec();
        node_ids.sort_unstable();
        if node_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("survivors", "repeated worker index"));
        }
        if let Some(&bad) = node_ids.iter().find(|&&l| l >= self.workers.len()) {
            return Err(Error::param(
                "survivors",
                format!("worker {bad} outside 0..{}", self.workers.len()),
            ));
        }
        let n_workers = self.workers.len();
        node_ids.extend(n_workers..n_workers + self.masters.len());

        let k = self.m * self.n;
        let mut g = DenseMatrix::zeros(node_ids.len(), k);
        let mut p_rows = Vec::with_capacity(node_ids.len());
        let mut q_rows = Vec::with_capacity(node_ids.len());
        for (row, &id) in node_ids.iter().enumerate() {
            let (p, q) = self.pair(id);
            for (col, v) in kron_row(p, q).entries {
                g[(row, col)] = v;
            }
            p_rows.push(p.clone());
            q_rows.push(q.clone());
        }
        Ok(GeneratorMatrix {
            node_ids,
            p_rows,
            q_rows,
            g,
        })
    }
}

/// `G = P ⊙ Q` restricted to the rows the master actually receives.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    /// Node behind each row: surviving workers ascending, then `N..N+R`.
    pub node_ids: Vec<usize>,
    pub p_rows: Vec<CodingVector>,
    pub q_rows: Vec<CodingVector>,
    pub g: DenseMatrix,
}

impl GeneratorMatrix {
    pub fn rows(&self) -> usize {
        self.g.rows()
    }

    pub fn k(&self) -> usize {
        self.g.cols()
    }
}

/// Checks a survivor set against the configuration: `N − S` distinct
/// workers from `0..N`.
pub fn validate_survivors(cfg: &SystemConfig, survivors: &[usize]) -> Result<()> {
    if survivors.len() != cfg.survivors() {
        return Err(Error::param(
            "survivors",
            format!(
                "expected N - S = {} survivors, got {}",
                cfg.survivors(),
                survivors.len()
            ),
        ));
    }
    let mut sorted = survivors.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("survivors", "repeated worker index"));
    }
    if let Some(&bad) = sorted.iter().find(|&&l| l >= cfg.workers) {
        return Err(Error::param(
            "survivors",
            format!("worker {bad} outside 0..{}", cfg.workers),
        ));
    }
    Ok(())
}

/// Draws a full code realization and assembles the generator for
/// `survivors`.
pub fn build_generator<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    survivors: &[usize],
    rng: &mut R,
) -> Result<GeneratorMatrix> {
    validate_survivors(cfg, survivors)?;
    CodeRealization::draw(cfg, rng)?.assemble(survivors)
}

/// Splits `x` into `parts` contiguous column blocks of equal width.
pub fn partition_columns(x: &DenseMatrix, parts: usize) -> Result<Vec<DenseMatrix>> {
    if parts == 0 || x.cols() % parts != 0 {
        return Err(Error::Shape {
            op: "partition_columns (parts must divide cols)",
            left: x.shape(),
            right: (parts, 0),
        });
    }
    let width = x.cols() / parts;
    Ok((0..parts).map(|i| x.column_block(i * width, width)).collect())
}

/// `Σ_{i ∈ support} v_i·blocks[i]`, touching only supported blocks.
pub fn encode_block(blocks: &[Matrix], v: &CodingVector) -> Result<Matrix> {
    encode_block_counted(blocks, v).map(|(m, _)| m)
}

/// [`encode_block`] plus its scalar operation count: `nnz` multiplies for
/// the first supported block and `2·nnz` multiply-adds for each further one.
pub fn encode_block_counted(blocks: &[Matrix], v: &CodingVector) -> Result<(Matrix, u64)> {
    if blocks.len() != v.length() {
        return Err(Error::param(
            "blocks",
            format!(
                "{} blocks for a coding vector of length {}",
                blocks.len(),
                v.length()
            ),
        ));
    }
    let shape = blocks.first().map_or((0, 0), Matrix::shape);
    if let Some(b) = blocks.iter().find(|b| b.shape() != shape) {
        return Err(Error::Shape {
            op: "encode_block",
            left: shape,
            right: b.shape(),
        });
    }
    let mut acc = DenseMatrix::zeros(shape.0, shape.1);
    let mut flops = 0u64;
    for (k, (i, c)) in v.entries().enumerate() {
        let nnz = blocks[i].nnz() as u64;
        flops += if k == 0 { nnz } else { 2 * nnz };
        match &blocks[i] {
            Matrix::Dense(d) => acc.axpy(c, d)?,
            Matrix::Sparse(s) => {
                let cols = acc.cols();
                let data = acc.as_mut_slice();
                for &(r, col, x) in s.entries() {
                    data[r * cols + col] += c * x;
                }
            }
        }
    }
    Ok((Matrix::compact(acc), flops))
}

/// A factorized generator, reusable across any number of result batches.
#[derive(Debug, Clone)]
pub struct Decoder {
    m: usize,
    n: usize,
    rank: usize,
    qr: PivotedQr,
}

impl Decoder {
    /// Rank-checks `gen` with the SVD and factorizes it once.
    pub fn new(gen: &GeneratorMatrix, m: usize, n: usize, tol: RankTolerance) -> Result<Self> {
        let k = m * n;
        if gen.k() != k {
            return Err(Error::Shape {
                op: "Decoder::new",
                left: gen.g.shape(),
                right: (gen.rows(), k),
            });
        }
        let rank = linalg::numerical_rank(&gen.g, tol)?;
        if rank < k || gen.rows() < k {
            return Err(Error::RankDeficient { rank, required: k });
        }
        let qr = PivotedQr::new(&gen.g)?;
        Ok(Self { m, n, rank, qr })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Multiply-adds for the factorization plus `rhs` solves.
    pub fn flops(&self, rhs: usize) -> u64 {
        self.qr.factor_flops() + rhs as u64 * self.qr.flops_per_rhs()
    }

    /// Solves for every entry `(a, b)` of the block products and tiles the
    /// estimates into `Ĉ`, block `(i, j)` at block-row `i`, block-column `j`.
    pub fn decode(&self, results: &[DenseMatrix]) -> Result<DenseMatrix> {
        let rows = self.qr.shape().0;
        if results.len() != rows {
            return Err(Error::param(
                "results",
                format!("expected {rows} results, got {}", results.len()),
            ));
        }
        let (br, bc) = results.first().map_or((0, 0), DenseMatrix::shape);
        if let Some(bad) = results.iter().find(|r| r.shape() != (br, bc)) {
            return Err(Error::Shape {
                op: "decode",
                left: (br, bc),
                right: bad.shape(),
            });
        }
        // row l of Y is result l flattened, so column a·bc + b is y^(a,b)
        let mut y = Vec::with_capacity(rows * br * bc);
        for r in results {
            y.extend_from_slice(r.as_slice());
        }
        let y = DenseMatrix::from_vec(rows, br * bc, y)?;
        let z = self.qr.solve(&y)?;

        let mut c_hat = DenseMatrix::zeros(br * self.m, bc * self.n);
        for i in 0..self.m {
            for j in 0..self.n {
                let coord = i * self.n + j;
                let block = DenseMatrix::from_vec(br, bc, z.row(coord).to_vec())?;
                c_hat.set_block(i * br, j * bc, &block);
            }
        }
        Ok(c_hat)
    }
}

/// Decodes the results of the rows of `gen` (in the same order) into `Ĉ`.
pub fn decode(gen: &GeneratorMatrix, results: &[DenseMatrix], cfg: &SystemConfig) -> Result<DenseMatrix> {
    if results.len() != gen.rows() {
        return Err(Error::param(
            "results",
            format!("expected {} results, got {}", gen.rows(), results.len()),
        ));
    }
    let block = cfg.block_shape();
    if let Some(bad) = results.iter().find(|r| r.shape() != block) {
        return Err(Error::Shape {
            op: "decode",
            left: block,
            right: bad.shape(),
        });
    }
    Decoder::new(gen, cfg.m, cfg.n, RankTolerance::Default)?.decode(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn full_weight_forces_full_support() {
        let w = WeightDistribution::dense(5).unwrap();
        let v = draw_coding_vector(5, &w, CoefficientDistribution::Uniform01, &mut rng(1)).unwrap();
        assert_eq!(v.support(), &[0, 1, 2, 3, 4]);
        assert!(v.coeffs().iter().all(|&c| c != 0.0));
    }

    #[test]
    fn single_weight_support_is_uniform() {
        let w = WeightDistribution::point(1, 8).unwrap();
        let mut r = rng(2);
        let mut counts = [0usize; 8];
        let draws = 100_000;
        for _ in 0..draws {
            let v = draw_coding_vector(8, &w, CoefficientDistribution::Uniform01, &mut r).unwrap();
            counts[v.support()[0]] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((0.115..=0.135).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn support_size_equals_sampled_weight() {
        let w = WeightDistribution::new(&[(1, 0.3), (2, 0.3), (4, 0.4)], 6).unwrap();
        for seed in 0..50 {
            let weight = w.sample(&mut rng(seed));
            let v = draw_coding_vector(6, &w, CoefficientDistribution::Uniform01, &mut rng(seed))
                .unwrap();
            assert_eq!(v.weight(), weight);
        }
    }

    #[test]
    fn draw_rejects_short_vectors() {
        let w = WeightDistribution::dense(5).unwrap();
        assert!(draw_coding_vector(4, &w, CoefficientDistribution::Uniform01, &mut rng(0)).is_err());
    }

    #[test]
    fn kron_examples() {
        let p = CodingVector::new(2, vec![(0, 1.0), (1, 2.0)]).unwrap();
        let q = CodingVector::new(2, vec![(0, 3.0), (1, 4.0)]).unwrap();
        assert_eq!(kron_row(&p, &q).to_dense(), vec![3.0, 4.0, 6.0, 8.0]);

        let e2 = CodingVector::unit(2, 1).unwrap();
        let e1 = CodingVector::unit(2, 0).unwrap();
        assert_eq!(kron_row(&e2, &e1).to_dense(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn kron_matches_naive_double_loop() {
        let mut r = rng(3);
        let p = draw_coding_vector(
            5,
            &WeightDistribution::point(3, 5).unwrap(),
            CoefficientDistribution::StandardNormal,
            &mut r,
        )
        .unwrap();
        let q = draw_coding_vector(
            4,
            &WeightDistribution::point(2, 4).unwrap(),
            CoefficientDistribution::StandardNormal,
            &mut r,
        )
        .unwrap();
        let row = kron_row(&p, &q);
        assert_eq!(row.nnz(), 6);
        let (pd, qd) = (p.to_dense(), q.to_dense());
        let mut naive = Vec::new();
        for pi in &pd {
            for qj in &qd {
                naive.push(pi * qj);
            }
        }
        assert_eq!(row.to_dense(), naive);
    }

    #[test]
    fn dense_generator_has_no_zeros() {
        let cfg = SystemConfig::new(3, 2, 8, 0).unwrap();
        let survivors: Vec<usize> = (0..8).collect();
        let gen = build_generator(&cfg, &survivors, &mut rng(4)).unwrap();
        assert_eq!(gen.g.shape(), (8, 6));
        assert!(gen.g.as_slice().iter().all(|&v| v != 0.0));
    }

    #[test]
    fn scalar_code_is_rank_one() {
        let cfg = SystemConfig::new(1, 1, 3, 1)
            .unwrap()
            .with_extra(
                2,
                WeightDistribution::dense(1).unwrap(),
                WeightDistribution::dense(1).unwrap(),
            );
        for seed in 0..20 {
            let gen = build_generator(&cfg, &[0, 2], &mut rng(seed)).unwrap();
            assert_eq!(gen.g.shape(), (4, 1));
            assert!(gen.g.as_slice().iter().all(|&v| v != 0.0));
            assert_eq!(linalg::numerical_rank(&gen.g, RankTolerance::Default).unwrap(), 1);
        }
    }

    #[test]
    fn malformed_survivors_rejected() {
        let cfg = SystemConfig::new(2, 2, 6, 2).unwrap();
        let mut r = rng(5);
        assert!(build_generator(&cfg, &[0, 1, 2], &mut r).is_err());
        assert!(build_generator(&cfg, &[0, 1, 2, 2], &mut r).is_err());
        assert!(build_generator(&cfg, &[0, 1, 2, 6], &mut r).is_err());
        assert!(build_generator(&cfg, &[5, 1, 2, 0], &mut r).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(3, 3, 8, 0).is_err()); // K = 9 > N
        assert!(SystemConfig::new(2, 2, 4, 5).is_err()); // S > N
        let cfg = SystemConfig::new(2, 2, 4, 0).unwrap().with_shape(3, 5, 4);
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig::new(2, 2, 4, 0)
            .unwrap()
            .with_worker_dists(WeightDistribution::dense(3).unwrap(), WeightDistribution::dense(2).unwrap());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partition_examples() {
        let mut r = rng(6);
        let x = random_dense(4, 4, &mut r);
        assert_eq!(partition_columns(&x, 1).unwrap(), vec![x.clone()]);

        let parts = partition_columns(&DenseMatrix::identity(4), 2).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(
            parts[0],
            DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]).unwrap()
        );

        let x = random_dense(6, 6, &mut r);
        let parts = partition_columns(&x, 3).unwrap();
        assert_eq!(DenseMatrix::hstack(&parts).unwrap(), x);

        assert!(matches!(partition_columns(&x, 4), Err(Error::Shape { .. })));
    }

    #[test]
    fn encode_examples() {
        let mut r = rng(7);
        let blocks: Vec<Matrix> = (0..3).map(|_| random_dense(4, 2, &mut r).into()).collect();
        let e1 = CodingVector::unit(3, 1).unwrap();
        assert_eq!(encode_block(&blocks, &e1).unwrap().to_dense(), blocks[1].to_dense());

        let m = random_dense(3, 3, &mut r);
        let same: Vec<Matrix> = vec![m.clone().into(), m.clone().into()];
        let ones = CodingVector::new(2, vec![(0, 1.0), (1, 1.0)]).unwrap();
        let mut twice = m.clone();
        twice.scale(2.0);
        assert_eq!(encode_block(&same, &ones).unwrap().to_dense(), twice);
    }

    #[test]
    fn encode_matches_dense_combination() {
        let mut r = rng(8);
        let blocks: Vec<DenseMatrix> = (0..5).map(|_| random_dense(6, 3, &mut r)).collect();
        let v = draw_coding_vector(
            5,
            &WeightDistribution::point(3, 5).unwrap(),
            CoefficientDistribution::StandardNormal,
            &mut r,
        )
        .unwrap();
        let wrapped: Vec<Matrix> = blocks.iter().cloned().map(Matrix::from).collect();
        let got = encode_block(&wrapped, &v).unwrap().to_dense();
        // oracle: combine over all blocks with the dense coefficient vector
        let dense_v = v.to_dense();
        let mut want = DenseMatrix::zeros(6, 3);
        for (block, &c) in blocks.iter().zip(&dense_v) {
            for (w, x) in want.as_mut_slice().iter_mut().zip(block.as_slice()) {
                *w += c * x;
            }
        }
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn encode_rejects_mismatched_blocks() {
        let blocks: Vec<Matrix> = vec![DenseMatrix::zeros(2, 2).into(), DenseMatrix::zeros(3, 2).into()];
        let v = CodingVector::unit(2, 0).unwrap();
        assert!(matches!(encode_block(&blocks, &v), Err(Error::Shape { .. })));
    }

    fn pipeline(cfg: &SystemConfig, code: &CodeRealization, survivors: &[usize], a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
        let a_blocks: Vec<Matrix> = partition_columns(a, cfg.m)?.into_iter().map(Matrix::from).collect();
        let b_blocks: Vec<Matrix> = partition_columns(b, cfg.n)?.into_iter().map(Matrix::from).collect();
        let gen = code.assemble(survivors)?;
        let results = gen
            .p_rows
            .iter()
            .zip(&gen.q_rows)
            .map(|(p, q)| {
                let ea = encode_block(&a_blocks, p)?;
                let eb = encode_block(&b_blocks, q)?;
                linalg::matmul_transpose_left(&ea, &eb)
            })
            .collect::<Result<Vec<_>>>()?;
        decode(&gen, &results, cfg)
    }

    fn rel_err(c: &DenseMatrix, c_hat: &DenseMatrix) -> f64 {
        linalg::spectral_norm(&c.sub(c_hat).unwrap()).unwrap() / linalg::spectral_norm(c).unwrap()
    }

    #[test]
    fn scalar_decode_unscales() {
        let mut r = rng(9);
        let cfg = SystemConfig::new(1, 1, 1, 0).unwrap().with_shape(5, 3, 4);
        let a = random_dense(5, 3, &mut r);
        let b = random_dense(5, 4, &mut r);
        let code = CodeRealization::draw(&cfg, &mut r).unwrap();
        let c_hat = pipeline(&cfg, &code, &[0], &a, &b).unwrap();
        let c = linalg::matmul_transpose_left(&a.into(), &b.into()).unwrap();
        assert!(rel_err(&c, &c_hat) < 1e-14);
    }

    #[test]
    fn dense_decode_recovers_product() {
        let mut r = rng(10);
        let cfg = SystemConfig::new(2, 2, 4, 0).unwrap().with_shape(4, 4, 4);
        let a = random_dense(4, 4, &mut r);
        let b = random_dense(4, 4, &mut r);
        let code = CodeRealization::draw(&cfg, &mut r).unwrap();
        let c_hat = pipeline(&cfg, &code, &[0, 1, 2, 3], &a, &b).unwrap();
        let c = linalg::matmul_transpose_left(&a.into(), &b.into()).unwrap();
        assert!(rel_err(&c, &c_hat) < 1e-10);
    }

    #[test]
    fn identity_code_reassembles_exactly() {
        let (m, n) = (2, 3);
        let mut workers = Vec::new();
        for i in 0..m {
            for j in 0..n {
                workers.push((CodingVector::unit(m, i).unwrap(), CodingVector::unit(n, j).unwrap()));
            }
        }
        // shuffle worker order so reassembly is not trivially sequential
        workers.reverse();
        let code = CodeRealization::from_vectors(m, n, workers, Vec::new()).unwrap();
        let cfg = SystemConfig::new(m, n, 6, 0).unwrap().with_shape(3, 4, 6);
        let mut r = rng(11);
        let a = random_dense(3, 4, &mut r);
        let b = random_dense(3, 6, &mut r);
        let c_hat = pipeline(&cfg, &code, &[0, 1, 2, 3, 4, 5], &a, &b).unwrap();
        let c = linalg::matmul_transpose_left(&a.into(), &b.into()).unwrap();
        assert_eq!(c_hat, c);
    }

    #[test]
    fn rank_deficient_decode_reports_rank() {
        let p = CodingVector::unit(2, 0).unwrap();
        let q = CodingVector::unit(2, 0).unwrap();
        let code = CodeRealization::from_vectors(2, 2, vec![(p, q); 4], Vec::new()).unwrap();
        let gen = code.assemble(&[0, 1, 2, 3]).unwrap();
        let cfg = SystemConfig::new(2, 2, 4, 0).unwrap();
        let results = vec![DenseMatrix::zeros(1, 1); 4];
        assert_eq!(
            decode(&gen, &results, &cfg),
            Err(Error::RankDeficient {
                rank: 1,
                required: 4
            })
        );
        assert!(matches!(decode(&gen, &results[..3], &cfg), Err(Error::Parameter { .. })));
    }

    proptest! {
        #[test]
        fn generator_structure_is_exact(seed in any::<u64>(), m in 1usize..5, n in 1usize..5, su in 0.0f64..1.0) {
            let k = m * n;
            let u = WeightDistribution::simplest(1.0 + su * (m as f64 - 1.0), m).unwrap();
            let v = WeightDistribution::simplest(1.0 + su * (n as f64 - 1.0), n).unwrap();
            let cfg = SystemConfig::new(m, n, k + 2, 1).unwrap().with_worker_dists(u, v);
            let survivors: Vec<usize> = (1..k + 2).collect();
            let gen = build_generator(&cfg, &survivors, &mut rng(seed)).unwrap();
            for l in 0..gen.rows() {
                let (p, q) = (&gen.p_rows[l], &gen.q_rows[l]);
                for i in 0..m {
                    for j in 0..n {
                        prop_assert_eq!(gen.g[(l, i * n + j)].to_bits(), (p.get(i) * q.get(j)).to_bits());
                    }
                }
                let row_nnz = gen.g.row(l).iter().filter(|x| **x != 0.0).count();
                prop_assert_eq!(row_nnz, p.weight() * q.weight());
            }
        }

        #[test]
        fn realization_independent_of_stragglers(seed in any::<u64>(), drop_a in 0usize..6, drop_b in 0usize..6) {
            let cfg = SystemConfig::new(2, 2, 6, 1)
                .unwrap()
                .with_worker_dists(WeightDistribution::simplest(1.5, 2).unwrap(), WeightDistribution::simplest(1.5, 2).unwrap());
            let sa: Vec<usize> = (0..6).filter(|&l| l != drop_a).collect();
            let sb: Vec<usize> = (0..6).filter(|&l| l != drop_b).collect();
            let ga = build_generator(&cfg, &sa, &mut rng(seed)).unwrap();
            let gb = build_generator(&cfg, &sb, &mut rng(seed)).unwrap();
            for (ra, &id) in ga.node_ids.iter().enumerate() {
                if let Some(rb) = gb.node_ids.iter().position(|&x| x == id) {
                    prop_assert_eq!(&ga.p_rows[ra], &gb.p_rows[rb]);
                    prop_assert_eq!(&ga.q_rows[ra], &gb.q_rows[rb]);
                }
            }
        }

        #[test]
        fn decode_recovers_product_when_full_rank(seed in any::<u64>(), m in 1usize..4, n in 1usize..4) {
            let mut r = rng(seed);
            let k = m * n;
            let cfg = SystemConfig::new(m, n, k + 3, 2)
                .unwrap()
                .with_shape(8, 2 * m, 3 * n)
                .with_worker_dists(
                    WeightDistribution::simplest((0.75 * m as f64).max(1.0), m).unwrap(),
                    WeightDistribution::dense(n).unwrap(),
                )
                .with_coeff(CoefficientDistribution::StandardNormal);
            let a = DenseMatrix::from_fn(8, 2 * m, |_, _| r.sample(rand_distr::StandardNormal));
            let b = DenseMatrix::from_fn(8, 3 * n, |_, _| r.sample(rand_distr::StandardNormal));
            let code = CodeRealization::draw(&cfg, &mut r).unwrap();
            let survivors: Vec<usize> = (2..k + 3).collect();
            if let Ok(c_hat) = pipeline(&cfg, &code, &survivors, &a, &b) {
                let c = linalg::matmul_transpose_left(&a.into(), &b.into()).unwrap();
                prop_assert!(rel_err(&c, &c_hat) < 1e-8);
            }
        }
    }
}
