//! In-process master-worker execution.
//!
//! The master partitions and encodes the inputs, ships one task per worker
//! over a channel to a bounded thread pool, computes its own `R` tasks
//! locally, and decodes from whatever the non-stragglers return. Stragglers
//! are pure erasures: they compute, but their results are dropped.

use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;

use rand::Rng;
use srkrp_core::analysis::{cost_model, CostReport};
use srkrp_core::codec::{self, CodeRealization, Decoder, SystemConfig};
use srkrp_core::linalg::{self, DenseMatrix, Matrix, RankTolerance, SparseMatrix};
use srkrp_core::weights::CoefficientDistribution;

use crate::{Error, Result};

/// Work sent to node `node_id`: the coded blocks `Ã_l` and `B̃_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskAssignment {
    /// `0..N` for workers, `N..N+R` for the master's own computations.
    pub node_id: usize,
    pub a_block: Matrix,
    pub b_block: Matrix,
    pub is_master_local: bool,
}

impl TaskAssignment {
    /// `nnz(Ã_l) + nnz(B̃_l)`
    pub fn payload_nnz(&self) -> u64 {
        (self.a_block.nnz() + self.b_block.nnz()) as u64
    }
}

/// Counted work of one execution, indexed by node id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionMetrics {
    pub per_node_comm: Vec<u64>,
    /// Multiply-adds spent on `Ãᵀ_l·B̃_l`.
    pub per_node_flops: Vec<u64>,
    pub encode_flops: u64,
    pub decode_flops: u64,
    pub results_collected: usize,
}

type StragglerHook<'a> = dyn Fn(usize, &mut DenseMatrix) + Sync + 'a;

/// Thread-pool settings plus an optional test hook.
pub struct Runtime<'a> {
    jobs: usize,
    straggler_hook: Option<&'a StragglerHook<'a>>,
    rank_tolerance: RankTolerance,
}

impl Default for Runtime<'_> {
    fn default() -> Self {
        Self::new(thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl<'a> Runtime<'a> {
    pub fn new(jobs: usize) -> Self {
        Self {
            jobs: jobs.max(1),
            straggler_hook: None,
            rank_tolerance: RankTolerance::Default,
        }
    }

    /// Lets a test rewrite each straggler's (erased) output before the
    /// master assembles its decoding input.
    pub fn with_straggler_hook(mut self, hook: &'a StragglerHook<'a>) -> Self {
        self.straggler_hook = Some(hook);
        self
    }

    pub fn with_rank_tolerance(mut self, tol: RankTolerance) -> Self {
        self.rank_tolerance = tol;
        self
    }

    /// Draws a code realization from `rng` and runs it.
    pub fn orchestrate<R: Rng + ?Sized>(
        &self,
        cfg: &SystemConfig,
        a: &DenseMatrix,
        b: &DenseMatrix,
        stragglers: &[usize],
        rng: &mut R,
    ) -> Result<(DenseMatrix, ExecutionMetrics)> {
        let code = CodeRealization::draw(cfg, rng)?;
        self.orchestrate_code(cfg, &code, a, b, stragglers)
    }

    /// Runs a given code realization end to end.
    pub fn orchestrate_code(
        &self,
        cfg: &SystemConfig,
        code: &CodeRealization,
        a: &DenseMatrix,
        b: &DenseMatrix,
        stragglers: &[usize],
    ) -> Result<(DenseMatrix, ExecutionMetrics)> {
        cfg.validate()?;
        check_inputs(cfg, code, a, b)?;
        let survivors = survivors_of(cfg, stragglers)?;

        let (tasks, encode_flops) = encode_tasks(cfg, code, a, b)?;
        let nodes = tasks.len();
        let mut metrics = ExecutionMetrics {
            per_node_comm: tasks.iter().map(TaskAssignment::payload_nnz).collect(),
            per_node_flops: vec![0; nodes],
            encode_flops,
            ..ExecutionMetrics::default()
        };

        let mut outputs = self.execute(tasks)?;
        for (id, out) in outputs.iter().enumerate() {
            metrics.per_node_flops[id] = out.as_ref().map_or(0, |(_, f)| *f);
        }

        // erase stragglers
        let mut is_straggler = vec![false; cfg.workers];
        for &l in stragglers {
            is_straggler[l] = true;
        }
        for (id, out) in outputs.iter_mut().enumerate().take(cfg.workers) {
            if is_straggler[id] {
                if let (Some(hook), Some((c, _))) = (self.straggler_hook, out.as_mut()) {
                    hook(id, c);
                }
            }
        }

        let gen = code.assemble(&survivors)?;
        let mut collected = Vec::with_capacity(gen.node_ids.len());
        for &id in &gen.node_ids {
            let (c, _) = outputs[id].take().expect("every task produces a result");
            collected.push(c);
        }
        metrics.results_collected = collected.len();

        let decoder = match Decoder::new(&gen, cfg.m, cfg.n, self.rank_tolerance) {
            Ok(d) => d,
            Err(source) => {
                return Err(Error::Decode {
                    source,
                    metrics: Box::new(metrics),
                })
            }
        };
        let (br, bc) = cfg.block_shape();
        metrics.decode_flops = decoder.flops(br * bc);
        match decoder.decode(&collected) {
            Ok(c_hat) => Ok((c_hat, metrics)),
            Err(source) => Err(Error::Decode {
                source,
                metrics: Box::new(metrics),
            }),
        }
    }

    /// Computes every task: workers on the pool, master-local tasks on the
    /// calling thread. Output `id` holds node `id`'s product and flop count.
    fn execute(&self, tasks: Vec<TaskAssignment>) -> Result<Vec<Option<(DenseMatrix, u64)>>> {
        let nodes = tasks.len();
        let (local, remote): (Vec<_>, Vec<_>) = tasks.into_iter().partition(|t| t.is_master_local);
        let mut outputs: Vec<Option<(DenseMatrix, u64)>> = vec![None; nodes];

        let (task_tx, task_rx) = mpsc::channel::<TaskAssignment>();
        let task_rx = Mutex::new(task_rx);
        let (res_tx, res_rx) = mpsc::channel();
        let threads = self.jobs.min(remote.len()).max(1);

        thread::scope(|scope| -> Result<()> {
            for _ in 0..threads {
                let res_tx = res_tx.clone();
                let task_rx = &task_rx;
                scope.spawn(move || loop {
                    let next = task_rx.lock().expect("task queue poisoned").recv();
                    let Ok(task) = next else { break };
                    let product = linalg::matmul_transpose_left_counted(&task.a_block, &task.b_block);
                    if res_tx.send((task.node_id, product)).is_err() {
                        break;
                    }
                });
            }
            drop(res_tx);
            for task in remote {
                task_tx.send(task).expect("worker pool alive");
            }
            drop(task_tx);

            for task in local {
                let product = linalg::matmul_transpose_left_counted(&task.a_block, &task.b_block)?;
                outputs[task.node_id] = Some(product);
            }
            // completion order is arbitrary; slot by node id
            for (id, product) in res_rx {
                outputs[id] = Some(product?);
            }
            Ok(())
        })?;
        Ok(outputs)
    }
}

/// [`Runtime::orchestrate`] on a pool sized to the machine.
pub fn orchestrate<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    a: &DenseMatrix,
    b: &DenseMatrix,
    stragglers: &[usize],
    rng: &mut R,
) -> Result<(DenseMatrix, ExecutionMetrics)> {
    Runtime::default().orchestrate(cfg, a, b, stragglers, rng)
}

fn check_inputs(cfg: &SystemConfig, code: &CodeRealization, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != (cfg.r, cfg.s) || b.shape() != (cfg.r, cfg.t) {
        return Err(srkrp_core::Error::Shape {
            op: "orchestrate (inputs vs configured r, s, t)",
            left: a.shape(),
            right: b.shape(),
        }
        .into());
    }
    if code.num_workers() != cfg.workers || code.num_masters() != cfg.extra {
        return Err(srkrp_core::Error::Shape {
            op: "orchestrate (code vs configured N, R)",
            left: (code.num_workers(), code.num_masters()),
            right: (cfg.workers, cfg.extra),
        }
        .into());
    }
    Ok(())
}

/// The `N − S` workers not in `stragglers`, ascending.
fn survivors_of(cfg: &SystemConfig, stragglers: &[usize]) -> Result<Vec<usize>> {
    let mut flags = vec![false; cfg.workers];
    for &l in stragglers {
        if l >= cfg.workers {
            return Err(Error::config(
                "stragglers",
                format!("node {l} is not a worker (workers are 0..{})", cfg.workers),
            ));
        }
        if std::mem::replace(&mut flags[l], true) {
            return Err(Error::config("stragglers", format!("node {l} listed twice")));
        }
    }
    if stragglers.len() != cfg.stragglers {
        return Err(Error::config(
            "stragglers",
            format!("expected S = {} stragglers, got {}", cfg.stragglers, stragglers.len()),
        ));
    }
    Ok((0..cfg.workers).filter(|&l| !flags[l]).collect())
}

fn encode_tasks(
    cfg: &SystemConfig,
    code: &CodeRealization,
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<(Vec<TaskAssignment>, u64)> {
    let to_blocks = |x: &DenseMatrix, parts| -> Result<Vec<Matrix>> {
        Ok(codec::partition_columns(x, parts)?
            .into_iter()
            .map(Matrix::compact)
            .collect())
    };
    let a_blocks = to_blocks(a, cfg.m)?;
    let b_blocks = to_blocks(b, cfg.n)?;
    let mut flops = 0;
    let mut tasks = Vec::with_capacity(cfg.workers + cfg.extra);
    for node_id in 0..cfg.workers + cfg.extra {
        let (p, q) = code.pair(node_id);
        let (a_block, fa) = codec::encode_block_counted(&a_blocks, p)?;
        let (b_block, fb) = codec::encode_block_counted(&b_blocks, q)?;
        flops += fa + fb;
        tasks.push(TaskAssignment {
            node_id,
            a_block,
            b_block,
            is_master_local: node_id >= cfg.workers,
        });
    }
    Ok((tasks, flops))
}

/// A uniformly random straggler set of size `S`, ascending.
pub fn random_stragglers<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<usize> {
    let mut set = rand::seq::index::sample(rng, cfg.workers, cfg.stragglers).into_vec();
    set.sort_unstable();
    set
}

/// `rows × cols` matrix with `round(density·rows·cols)` standard-normal
/// nonzeros at uniformly random positions.
pub fn random_sparse_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    density: f64,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::config("density", format!("{density} outside (0, 1]")));
    }
    let total = rows * cols;
    let nnz = ((density * total as f64).round() as usize).min(total);
    let mut positions = rand::seq::index::sample(rng, total, nnz).into_vec();
    positions.sort_unstable();
    let triplets = positions
        .into_iter()
        .map(|p| (p / cols, p % cols, CoefficientDistribution::StandardNormal.sample(rng)))
        .collect();
    Ok(SparseMatrix::from_triplets(rows, cols, triplets)?.to_dense())
}

/// Measured averages next to the cost model evaluated at the mean input
/// sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMeasurement {
    pub trials: usize,
    pub mean_nnz_a: f64,
    pub mean_nnz_b: f64,
    /// Mean over workers and trials of `nnz(Ã_l) + nnz(B̃_l)`.
    pub mean_worker_comm: f64,
    pub mean_worker_flops: f64,
    pub mean_encode_flops: f64,
    /// Over trials that reached decoding.
    pub mean_decode_flops: f64,
    pub decode_failures: usize,
    pub predicted: CostReport,
}

/// Runs `trials` random executions with inputs of the given densities.
pub fn measure_empirical_costs<R: Rng + ?Sized>(
    runtime: &Runtime<'_>,
    cfg: &SystemConfig,
    density_a: f64,
    density_b: f64,
    trials: usize,
    rng: &mut R,
) -> Result<CostMeasurement> {
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    cfg.validate()?;
    let (mut nnz_a, mut nnz_b, mut comm, mut flops, mut enc, mut dec) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut decoded = 0usize;
    let mut failures = 0usize;
    for _ in 0..trials {
        let a = random_sparse_matrix(cfg.r, cfg.s, density_a, rng)?;
        let b = random_sparse_matrix(cfg.r, cfg.t, density_b, rng)?;
        nnz_a += a.nnz() as f64;
        nnz_b += b.nnz() as f64;
        let stragglers = random_stragglers(cfg, rng);
        let metrics = match runtime.orchestrate(cfg, &a, &b, &stragglers, rng) {
            Ok((_, m)) => m,
            Err(Error::Decode { metrics, .. }) => {
                failures += 1;
                *metrics
            }
            Err(e) => return Err(e),
        };
        let workers = cfg.workers as f64;
        comm += metrics.per_node_comm[..cfg.workers].iter().sum::<u64>() as f64 / workers;
        flops += metrics.per_node_flops[..cfg.workers].iter().sum::<u64>() as f64 / workers;
        enc += metrics.encode_flops as f64;
        if metrics.decode_flops > 0 {
            dec += metrics.decode_flops as f64;
            decoded += 1;
        }
    }
    let t = trials as f64;
    let (mean_nnz_a, mean_nnz_b) = (nnz_a / t, nnz_b / t);
    let predicted = cost_model(cfg, mean_nnz_a.round() as u64, mean_nnz_b.round() as u64)?;
    Ok(CostMeasurement {
        trials,
        mean_nnz_a,
        mean_nnz_b,
        mean_worker_comm: comm / t,
        mean_worker_flops: flops / t,
        mean_encode_flops: enc / t,
        mean_decode_flops: if decoded > 0 { dec / decoded as f64 } else { 0.0 },
        decode_failures: failures,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use srkrp_core::codec::CodingVector;
    use srkrp_core::weights::WeightDistribution;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| CoefficientDistribution::StandardNormal.sample(rng))
    }

    fn rel_err(c: &DenseMatrix, c_hat: &DenseMatrix) -> f64 {
        c.sub(c_hat).unwrap().frobenius_norm() / c.frobenius_norm()
    }

    #[test]
    fn dense_code_without_stragglers() {
        let cfg = SystemConfig::new(2, 2, 4, 0).unwrap().with_shape(4, 4, 4);
        let mut r = rng(1);
        let (a, b) = (normal(4, 4, &mut r), normal(4, 4, &mut r));
        let (c_hat, m) = Runtime::new(3).orchestrate(&cfg, &a, &b, &[], &mut r).unwrap();
        let c = a.transpose().matmul(&b).unwrap();
        assert!(rel_err(&c, &c_hat) < 1e-10);
        assert_eq!(m.results_collected, 4);
        assert!(m.decode_flops > 0 && m.encode_flops > 0);
    }

    #[test]
    fn exactly_k_survivors_suffice() {
        let cfg = SystemConfig::new(2, 2, 7, 3).unwrap().with_shape(3, 4, 6);
        let mut r = rng(2);
        let (a, b) = (normal(3, 4, &mut r), normal(3, 6, &mut r));
        let (c_hat, m) = Runtime::new(2).orchestrate(&cfg, &a, &b, &[0, 3, 6], &mut r).unwrap();
        assert!(rel_err(&a.transpose().matmul(&b).unwrap(), &c_hat) < 1e-10);
        assert_eq!(m.results_collected, 4);
    }

    #[test]
    fn single_worker_comm_is_input_nnz() {
        let cfg = SystemConfig::new(1, 1, 1, 0).unwrap().with_shape(3, 5, 2);
        let mut r = rng(3);
        let (a, b) = (normal(3, 5, &mut r), normal(3, 2, &mut r));
        let (_, m) = Runtime::new(1).orchestrate(&cfg, &a, &b, &[], &mut r).unwrap();
        assert_eq!(m.per_node_comm, vec![(a.nnz() + b.nnz()) as u64]);
        assert_eq!(m.per_node_flops, vec![3 * 5 * 2]);
    }

    #[test]
    fn identity_code_is_bit_exact() {
        let (mm, nn) = (2, 3);
        let cfg = SystemConfig::new(mm, nn, 6, 0).unwrap().with_shape(5, 4, 6);
        let workers = (0..6)
            .rev()
            .map(|l| {
                (
                    CodingVector::unit(mm, l / nn).unwrap(),
                    CodingVector::unit(nn, l % nn).unwrap(),
                )
            })
            .collect();
        let code = CodeRealization::from_vectors(mm, nn, workers, vec![]).unwrap();
        let mut r = rng(4);
        let (a, b) = (normal(5, 4, &mut r), normal(5, 6, &mut r));
        let (c_hat, _) = Runtime::new(4).orchestrate_code(&cfg, &code, &a, &b, &[]).unwrap();
        // block-wise direct products, reassembled
        let a_blocks = codec::partition_columns(&a, mm).unwrap();
        let b_blocks = codec::partition_columns(&b, nn).unwrap();
        let mut want = DenseMatrix::zeros(4, 6);
        for (i, ab) in a_blocks.iter().enumerate() {
            for (j, bb) in b_blocks.iter().enumerate() {
                let c = linalg::matmul_transpose_left(&ab.clone().into(), &bb.clone().into()).unwrap();
                want.set_block(i * 2, j * 2, &c);
            }
        }
        assert_eq!(c_hat, want);
    }

    #[test]
    fn straggler_outputs_are_unused() {
        let cfg = SystemConfig::new(2, 2, 8, 3).unwrap().with_shape(4, 4, 4);
        let mut r = rng(5);
        let (a, b) = (normal(4, 4, &mut r), normal(4, 4, &mut r));
        let code = CodeRealization::draw(&cfg, &mut r).unwrap();
        let stragglers = [1, 4, 7];
        let plain = Runtime::new(2).orchestrate_code(&cfg, &code, &a, &b, &stragglers).unwrap();
        let zero = |_: usize, c: &mut DenseMatrix| *c = DenseMatrix::zeros(c.rows(), c.cols());
        let zeroed = Runtime::new(2)
            .with_straggler_hook(&zero)
            .orchestrate_code(&cfg, &code, &a, &b, &stragglers)
            .unwrap();
        let garbage = |l: usize, c: &mut DenseMatrix| c.scale(1e9 + l as f64);
        let noisy = Runtime::new(2)
            .with_straggler_hook(&garbage)
            .orchestrate_code(&cfg, &code, &a, &b, &stragglers)
            .unwrap();
        assert_eq!(plain, zeroed);
        assert_eq!(plain, noisy);
    }

    #[test]
    fn master_tasks_cannot_straggle() {
        let u = WeightDistribution::dense(2).unwrap();
        let cfg = SystemConfig::new(2, 2, 5, 1)
            .unwrap()
            .with_shape(2, 2, 2)
            .with_extra(1, u.clone(), u);
        let mut r = rng(6);
        let (a, b) = (normal(2, 2, &mut r), normal(2, 2, &mut r));
        let err = Runtime::new(1).orchestrate(&cfg, &a, &b, &[5], &mut r).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let (_, m) = Runtime::new(1).orchestrate(&cfg, &a, &b, &[4], &mut r).unwrap();
        assert_eq!(m.results_collected, 5);
        assert_eq!(m.per_node_comm.len(), 6);
    }

    #[test]
    fn metrics_are_deterministic() {
        let cfg = SystemConfig::new(4, 4, 20, 4)
            .unwrap()
            .with_shape(8, 16, 16)
            .with_worker_dists(WeightDistribution::point(2, 4).unwrap(), WeightDistribution::point(2, 4).unwrap());
        let run = |jobs| {
            let mut r = rng(7);
            let a = random_sparse_matrix(8, 16, 0.3, &mut r).unwrap();
            let b = random_sparse_matrix(8, 16, 0.3, &mut r).unwrap();
            let s = random_stragglers(&cfg, &mut r);
            match Runtime::new(jobs).orchestrate(&cfg, &a, &b, &s, &mut r) {
                Ok((c, m)) => (Some(c), m),
                Err(Error::Decode { metrics, .. }) => (None, *metrics),
                Err(e) => panic!("{e}"),
            }
        };
        assert_eq!(run(1), run(1));
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rank_deficient_code_reports_metrics() {
        // every worker sees only block (0, 0)
        let cfg = SystemConfig::new(2, 1, 3, 0).unwrap().with_shape(2, 2, 1);
        let workers = (0..3)
            .map(|_| (CodingVector::unit(2, 0).unwrap(), CodingVector::unit(1, 0).unwrap()))
            .collect();
        let code = CodeRealization::from_vectors(2, 1, workers, vec![]).unwrap();
        let mut r = rng(8);
        let (a, b) = (normal(2, 2, &mut r), normal(2, 1, &mut r));
        match Runtime::new(2).orchestrate_code(&cfg, &code, &a, &b, &[]) {
            Err(Error::Decode { source, metrics }) => {
                assert!(matches!(source, srkrp_core::Error::RankDeficient { rank: 1, required: 2 }));
                assert_eq!(metrics.results_collected, 3);
                assert_eq!(metrics.per_node_comm.len(), 3);
            }
            other => panic!("expected decode failure, got {other:?}"),
        }
    }

    #[test]
    fn dense_limit_comm() {
        let cfg = SystemConfig::new(2, 2, 6, 2).unwrap().with_shape(4, 6, 8);
        let m = measure_empirical_costs(&Runtime::new(2), &cfg, 1.0, 1.0, 3, &mut rng(9)).unwrap();
        // a dense coded block fills its r × s/m shape; the model counts the
        // u_avg overlapping source blocks separately
        assert_eq!(m.mean_worker_comm, (4 * 6 / 2 + 4 * 8 / 2) as f64);
        assert_eq!(m.predicted.per_worker_comm, (4 * 6 + 4 * 8) as f64);
    }

    #[test]
    fn weight_one_code_preserves_block_nnz() {
        let one = WeightDistribution::point(1, 4).unwrap();
        let cfg = SystemConfig::new(4, 4, 16, 0)
            .unwrap()
            .with_shape(8, 8, 8)
            .with_worker_dists(one.clone(), one);
        let mut r = rng(10);
        let a = random_sparse_matrix(8, 8, 0.25, &mut r).unwrap();
        let b = random_sparse_matrix(8, 8, 0.25, &mut r).unwrap();
        let code = CodeRealization::draw(&cfg, &mut r).unwrap();
        let (tasks, _) = encode_tasks(&cfg, &code, &a, &b).unwrap();
        let a_blocks = codec::partition_columns(&a, 4).unwrap();
        let b_blocks = codec::partition_columns(&b, 4).unwrap();
        for t in &tasks {
            let (p, q) = code.pair(t.node_id);
            assert_eq!(t.a_block.nnz(), a_blocks[p.support()[0]].nnz());
            assert_eq!(t.b_block.nnz(), b_blocks[q.support()[0]].nnz());
        }
    }

    #[test]
    fn sparse_inputs_comm_near_estimate() {
        let three = WeightDistribution::point(3, 8).unwrap();
        let cfg = SystemConfig::new(8, 8, 72, 8)
            .unwrap()
            .with_shape(64, 64, 64)
            .with_worker_dists(three.clone(), three);
        let m = measure_empirical_costs(&Runtime::new(2), &cfg, 0.1, 0.1, 3, &mut rng(11)).unwrap();
        let ratio = m.mean_worker_comm / m.predicted.per_worker_comm;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }
}
