//! Team network encoder: stacked graph convolutions whose outputs are
//! concatenated into node embeddings, followed by a clustering head that
//! yields soft and hard cluster assignments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, SocialNetwork};
use crate::sparse::Csr;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MAX_DEFAULT_CLUSTERS: usize = 256;

/// `⌈√n⌉`, clamped to `[2, 256]`.
pub fn default_cluster_count(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(2, MAX_DEFAULT_CLUSTERS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderDims {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub clusters: usize,
}

impl EncoderDims {
    pub fn new(input_dim: usize, hidden: Vec<usize>, clusters: usize) -> Result<Self> {
        let dims = EncoderDims {
            input_dim,
            hidden,
            clusters,
        };
        dims.validate()?;
        Ok(dims)
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Validation("encoder needs at least one layer".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Validation("hidden sizes must be positive".into()));
        }
        if self.clusters < 2 {
            return Err(Error::Validation(format!(
                "cluster count must be at least 2, got {}",
                self.clusters
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.hidden.len()
    }

    /// Width of the concatenated embedding `Z`.
    pub fn embedding_dim(&self) -> usize {
        self.hidden.iter().sum()
    }

    /// `(in, out)` shape of each layer weight.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut inputs = vec![self.input_dim];
        inputs.extend(&self.hidden[..self.hidden.len() - 1]);
        inputs.into_iter().zip(self.hidden.iter().copied()).collect()
    }
}

/// Trainable weights: one matrix per convolution layer plus `W_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    dims: EncoderDims,
    pub(crate) layer_weights: Vec<Array2<f64>>,
    pub(crate) cluster_weight: Array2<f64>,
}

impl EncoderParams {
    pub fn new(dims: EncoderDims, layer_weights: Vec<Array2<f64>>, cluster_weight: Array2<f64>) -> Result<Self> {
        dims.validate()?;
        let shapes = dims.layer_shapes();
        if layer_weights.len() != shapes.len() {
            return Err(Error::Validation(format!(
                "expected {} layer weights, got {}",
                shapes.len(),
                layer_weights.len()
            )));
        }
        for (l, (w, &shape)) in layer_weights.iter().zip(&shapes).enumerate() {
            if w.dim() != shape {
                return Err(Error::Validation(format!(
                    "layer {} weight is {:?}, expected {:?}",
                    l + 1,
                    w.dim(),
                    shape
                )));
            }
        }
        if cluster_weight.dim() != (dims.embedding_dim(), dims.clusters) {
            return Err(Error::Validation(format!(
                "cluster weight is {:?}, expected {:?}",
                cluster_weight.dim(),
                (dims.embedding_dim(), dims.clusters)
            )));
        }
        let params = EncoderParams {
            dims,
            layer_weights,
            cluster_weight,
        };
        if !params.is_finite() {
            return Err(Error::Validation("encoder weights must be finite".into()));
        }
        Ok(params)
    }

    /// Uniform in `±1/√fan_in` for every matrix.
    pub fn init<R: Rng>(dims: EncoderDims, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows.max(1) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
        };
        let layer_weights = dims.layer_shapes().into_iter().map(|(i, o)| uniform(i, o)).collect();
        let cluster_weight = uniform(dims.embedding_dim(), dims.clusters);
        EncoderParams::new(dims, layer_weights, cluster_weight)
    }

    pub fn dims(&self) -> &EncoderDims {
        &self.dims
    }

    pub fn layer_weights(&self) -> &[Array2<f64>] {
        &self.layer_weights
    }

    pub fn cluster_weight(&self) -> &Array2<f64> {
        &self.cluster_weight
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.matrices().map(|m| m.len()).sum()
    }

    /// Layer weights in order, then `W_c`.
    pub fn matrices(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.layer_weights.iter().chain(std::iter::once(&self.cluster_weight))
    }

    pub(crate) fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.layer_weights
            .iter_mut()
            .chain(std::iter::once(&mut self.cluster_weight))
    }
}

/// Normalized adjacency and raw features, computed once per network.
#[derive(Debug, Clone)]
pub struct GraphInput<'a> {
    pub norm_adj: Csr,
    pub features: &'a Csr,
}

impl<'a> GraphInput<'a> {
    pub fn new(net: &'a SocialNetwork) -> Self {
        GraphInput {
            norm_adj: normalize_adjacency(net),
            features: net.features(),
        }
    }

    pub fn n(&self) -> usize {
        self.norm_adj.rows()
    }
}

fn relu(m: &mut Array2<f64>) {
    m.mapv_inplace(|v| v.max(0.0));
}

/// One convolution: `act(Â · H · W)` with ReLU when `apply_activation`.
pub fn gcn_layer_forward(
    norm_adj: &Csr,
    h_prev: ArrayView2<f64>,
    w: ArrayView2<f64>,
    apply_activation: bool,
) -> Result<Array2<f64>> {
    if norm_adj.rows() != norm_adj.cols() || norm_adj.cols() != h_prev.nrows() || h_prev.ncols() != w.nrows() {
        return Err(Error::Contract(format!(
            "gcn layer shapes: adj {}x{}, h {:?}, w {:?}",
            norm_adj.rows(),
            norm_adj.cols(),
            h_prev.dim(),
            w.dim()
        )));
    }
    let mut out = norm_adj.mul_dense(h_prev.dot(&w).view());
    if apply_activation {
        relu(&mut out);
    }
    Ok(out)
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activation `Â·H^{l-1}·W^l` for each layer.
    pub pre_activations: Vec<Array2<f64>>,
    /// `H^l` for each layer.
    pub hidden: Vec<Array2<f64>>,
    pub z: Array2<f64>,
    /// `Z·W_c` before the ReLU.
    pub cluster_logits: Array2<f64>,
    pub soft_assign: Array2<f64>,
}

pub(crate) fn check_input(input: &GraphInput<'_>, params: &EncoderParams) -> Result<()> {
    if input.features.cols() != params.dims.input_dim {
        return Err(Error::Contract(format!(
            "network has {} features, encoder expects {}",
            input.features.cols(),
            params.dims.input_dim
        )));
    }
    Ok(())
}

pub fn forward(input: &GraphInput<'_>, params: &EncoderParams) -> Result<ForwardTrace> {
    check_input(input, params)?;
    let mut pre_activations = Vec::with_capacity(params.dims.layers());
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(params.dims.layers());
    for (l, w) in params.layer_weights.iter().enumerate() {
        let projected = match hidden.last() {
            None => input.features.mul_dense(w.view()),
            Some(h) => h.dot(w),
        };
        let pre = input.norm_adj.mul_dense(projected.view());
        let mut h = pre.clone();
        relu(&mut h);
        pre_activations.push(pre);
        hidden.push(h);
        debug_assert_eq!(hidden[l].ncols(), params.dims.hidden[l]);
    }
    let views: Vec<ArrayView2<f64>> = hidden.iter().map(|h| h.view()).collect();
    let z = concatenate(Axis(1), &views).expect("hidden blocks share row count");
    let cluster_logits = z.dot(&params.cluster_weight);
    let mut e = cluster_logits.clone();
    relu(&mut e);
    let soft_assign = softmax_rows(&e);
    Ok(ForwardTrace {
        pre_activations,
        hidden,
        z,
        cluster_logits,
        soft_assign,
    })
}

/// Node embeddings `Z = [H¹ | … | H^L]`.
pub fn encode(net: &SocialNetwork, params: &EncoderParams) -> Result<Array2<f64>> {
    Ok(forward(&GraphInput::new(net), params)?.z)
}

/// Row softmax with the row maximum subtracted first.
pub fn softmax_rows(e: &Array2<f64>) -> Array2<f64> {
    let mut out = e.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    out
}

/// `softmax(ReLU(Z·W_c))` row-wise.
pub fn soft_assign(z: ArrayView2<f64>, w_c: ArrayView2<f64>) -> Result<Array2<f64>> {
    if z.ncols() != w_c.nrows() {
        return Err(Error::Contract(format!(
            "embedding width {} does not match cluster weight rows {}",
            z.ncols(),
            w_c.nrows()
        )));
    }
    let mut e = z.dot(&w_c);
    relu(&mut e);
    Ok(softmax_rows(&e))
}

/// 1-based argmax per row; ties go to the lowest cluster index.
pub fn hard_assign(c_mat: ArrayView2<f64>) -> Vec<usize> {
    c_mat
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best + 1
        })
        .collect()
}

/// Groups node ids by their 1-based cluster. Every cluster gets an entry.
pub fn build_containers(h: &[usize], c: usize) -> Result<BTreeMap<usize, Vec<usize>>> {
    let mut containers: BTreeMap<usize, Vec<usize>> = (1..=c).map(|m| (m, Vec::new())).collect();
    for (node, &m) in h.iter().enumerate() {
        match containers.get_mut(&m) {
            Some(list) => list.push(node),
            None => {
                return Err(Error::Contract(format!(
                    "node {node} assigned to cluster {m}, outside 1..={c}"
                )))
            }
        }
    }
    Ok(containers)
}

/// Embeddings and cluster structure of a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    embeddings: Array2<f64>,
    soft_assign: Array2<f64>,
    hard_assign: Vec<usize>,
    containers: BTreeMap<usize, Vec<usize>>,
}

impl ClusterModel {
    pub fn build(net: &SocialNetwork, params: &EncoderParams) -> Result<Self> {
        let trace = forward(&GraphInput::new(net), params)?;
        ClusterModel::from_parts(trace.z, trace.soft_assign)
    }

    /// Derives hard assignments and containers from `Z` and `C`.
    pub fn from_parts(embeddings: Array2<f64>, soft_assign: Array2<f64>) -> Result<Self> {
        if embeddings.nrows() != soft_assign.nrows() {
            return Err(Error::Contract("embeddings and assignments disagree on n".into()));
        }
        if soft_assign.ncols() < 2 {
            return Err(Error::Contract("need at least two clusters".into()));
        }
        for (i, row) in soft_assign.rows().into_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!("assignment row {i} is not a distribution")));
            }
        }
        let hard_assign = hard_assign(soft_assign.view());
        let containers = build_containers(&hard_assign, soft_assign.ncols())?;
        Ok(ClusterModel {
            embeddings,
            soft_assign,
            hard_assign,
            containers,
        })
    }

    pub fn n(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn clusters(&self) -> usize {
        self.soft_assign.ncols()
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.embeddings
    }

    pub fn soft_assign(&self) -> &Array2<f64> {
        &self.soft_assign
    }

    /// 1-based cluster of every node.
    pub fn hard_assign(&self) -> &[usize] {
        &self.hard_assign
    }

    pub fn containers(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.containers
    }

    pub fn container(&self, cluster: usize) -> &[usize] {
        self.containers.get(&cluster).map_or(&[], Vec::as_slice)
    }

    pub fn embedding_slice(&self, cols: std::ops::Range<usize>) -> ArrayView2<'_, f64> {
        self.embeddings.slice(s![.., cols])
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format_version: u32,
    dims: EncoderDims,
    layer_weights: Vec<Vec<Vec<f64>>>,
    cluster_weight: Vec<Vec<f64>>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Checkpoint(format!("{what} has ragged rows")));
    }
    Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Checkpoint(format!("{what}: {e}")))
}

pub fn checkpoint_to_string(params: &EncoderParams) -> String {
    let doc = CheckpointDoc {
        format_version: CHECKPOINT_VERSION,
        dims: params.dims.clone(),
        layer_weights: params.layer_weights.iter().map(to_rows).collect(),
        cluster_weight: to_rows(&params.cluster_weight),
    };
    serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
}

pub fn checkpoint_from_str(text: &str) -> Result<EncoderParams> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    match probe.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
        Some(v) => return Err(Error::Checkpoint(format!("unsupported format version {v}"))),
        None => return Err(Error::Checkpoint("missing format_version".into())),
    }
    let doc: CheckpointDoc = serde_json::from_value(probe).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let layers = doc
        .layer_weights
        .into_iter()
        .enumerate()
        .map(|(l, rows)| from_rows(rows, &format!("layer {}", l + 1)))
        .collect::<Result<Vec<_>>>()?;
    let cluster_weight = from_rows(doc.cluster_weight, "cluster weight")?;
    EncoderParams::new(doc.dims, layers, cluster_weight).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_string(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EncoderParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SyntheticConfig};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net() -> SocialNetwork {
        generate_synthetic(&SyntheticConfig {
            n: 12,
            d: 6,
            blocks: 3,
            teams: 4,
            ..Default::default()
        })
        .unwrap()
        .network
    }

    #[test]
    fn identity_layer_is_passthrough() {
        let eye = Csr::from_dense(Array2::<f64>::eye(3).view());
        let h = array![[1.0, -2.0], [3.0, 4.0], [-5.0, 6.0]];
        let out = gcn_layer_forward(&eye, h.view(), Array2::eye(2).view(), false).unwrap();
        assert_eq!(out, h);
        let zeros = Array2::zeros((3, 2));
        let out = gcn_layer_forward(&eye, zeros.view(), array![[1.0, 2.0], [3.0, 4.0]].view(), true).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn complete_pair_layer() {
        let adj = Csr::from_dense(array![[0.5, 0.5], [0.5, 0.5]].view());
        let h = array![[1.0, 0.0], [0.0, 1.0]];
        let out = gcn_layer_forward(&adj, h.view(), Array2::eye(2).view(), true).unwrap();
        assert_eq!(out, array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn layer_shape_mismatch_is_contract_error() {
        let adj = Csr::from_dense(Array2::<f64>::eye(2).view());
        let h = Array2::zeros((2, 3));
        let err = gcn_layer_forward(&adj, h.view(), Array2::zeros((2, 2)).view(), true);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn embedding_width_is_sum_of_hidden() {
        let net = small_net();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = EncoderParams::init(EncoderDims::new(6, vec![4, 3], 3).unwrap(), &mut rng).unwrap();
        assert_eq!(encode(&net, &params).unwrap().dim(), (12, 7));

        let one = EncoderParams::init(EncoderDims::new(6, vec![5], 3).unwrap(), &mut rng).unwrap();
        let trace = forward(&GraphInput::new(&net), &one).unwrap();
        assert_eq!(trace.z, trace.hidden[0]);
    }

    #[test]
    fn zero_features_give_zero_embeddings() {
        let adj = Csr::from_dense(array![[0.0, 1.0], [1.0, 0.0]].view());
        let net = SocialNetwork::new(adj, Csr::zeros(2, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = EncoderParams::init(EncoderDims::new(3, vec![4, 4], 2).unwrap(), &mut rng).unwrap();
        assert!(encode(&net, &params).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_rejects_dimension_mismatch() {
        let net = small_net();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = EncoderParams::init(EncoderDims::new(5, vec![4], 2).unwrap(), &mut rng).unwrap();
        assert!(matches!(encode(&net, &params), Err(Error::Contract(_))));
    }

    #[test]
    fn softmax_examples() {
        let c = softmax_rows(&array![[0.0, 0.0], [2f64.ln(), 0.0]]);
        assert!((c[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((c[[1, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[[1, 1]] - 1.0 / 3.0).abs() < 1e-15);
        let big = softmax_rows(&array![[1000.0, 999.0, 0.0]]);
        assert!(big.iter().all(|v| v.is_finite()));
        assert!((big.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_assign_examples() {
        let c = array![[0.2, 0.8, 0.0], [0.5, 0.5, 0.0], [0.1, 0.1, 0.8]];
        assert_eq!(hard_assign(c.view()), vec![2, 1, 3]);
    }

    #[test]
    fn container_examples() {
        let k = build_containers(&[1, 2, 1], 2).unwrap();
        assert_eq!(k[&1], vec![0, 2]);
        assert_eq!(k[&2], vec![1]);
        let k = build_containers(&[1, 1], 3).unwrap();
        assert!(k[&2].is_empty() && k[&3].is_empty());
        let k = build_containers(&[], 2).unwrap();
        assert!(k.values().all(Vec::is_empty));
        assert!(build_containers(&[3], 2).is_err());
        assert!(build_containers(&[0], 2).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_version_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = EncoderParams::init(EncoderDims::new(6, vec![4, 3], 3).unwrap(), &mut rng).unwrap();
        let text = checkpoint_to_string(&params);
        assert_eq!(checkpoint_from_str(&text).unwrap(), params);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(checkpoint_from_str(&bumped), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn default_cluster_count_rule() {
        assert_eq!(default_cluster_count(40), 7);
        assert_eq!(default_cluster_count(1), 2);
        assert_eq!(default_cluster_count(1_000_000), 256);
    }

    fn naive_softmax(row: &[f64]) -> Vec<f64> {
        let total: f64 = row.iter().map(|v| v.exp()).sum();
        row.iter().map(|v| v.exp() / total).collect()
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(row in proptest::collection::vec(0.0f64..5.0, 2..6), shift in -20.0f64..20.0) {
            let n = row.len();
            let base = softmax_rows(&Array2::from_shape_vec((1, n), row.clone()).unwrap());
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            let moved = softmax_rows(&Array2::from_shape_vec((1, n), shifted).unwrap());
            let naive = naive_softmax(&row);
            for j in 0..n {
                prop_assert!((base[[0, j]] - moved[[0, j]]).abs() < 1e-12);
                prop_assert!((base[[0, j]] - naive[j]).abs() < 1e-12);
            }
            prop_assert!((base.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn containers_partition_nodes(h in proptest::collection::vec(1usize..=5, 0..40)) {
            let k = build_containers(&h, 5).unwrap();
            let mut all: Vec<usize> = k.values().flatten().copied().collect();
            prop_assert_eq!(all.len(), h.len());
            all.sort_unstable();
            prop_assert_eq!(all, (0..h.len()).collect::<Vec<_>>());
            for (m, nodes) in &k {
                prop_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(nodes.iter().all(|&v| h[v] == *m));
            }
        }
    }
}
