//! ReLU network architecture synthesis and exact lattice-form assembly.
//!
//! A continuous piecewise-linear function in two-level lattice form,
//! `f(x) = max_i min_{j in s_i} l_j(x)`, maps onto a three-part ReLU
//! network: one linear layer computing the routed local functions, a bank
//! of parallel min cascades (one per subset), and a final max cascade. The
//! two-input blocks come from the exact identity
//! `max{a,b} = (a+b)/2 + |a-b|/2` realized with four ReLUs, so the
//! assembled network reproduces the lattice form up to rounding, not up to
//! an approximation error.
//!
//! The module also sizes architectures from *counts* alone
//! ([`infer_architecture`]) and embeds a small exact network into any
//! larger architecture of the same family ([`embed`]) by duplicating rows,
//! never by zero-filling: zero entries would feed spurious values into the
//! min blocks.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeSet;
use std::fmt;

/// Parameter count above which a descriptor carries a resource warning.
pub const PARAM_WARNING_THRESHOLD: u128 = 100_000_000;

/// Ceiling on the total weight elements [`embed`] will materialize
/// (the cascade layers are stored dense, so they dominate). Beyond this,
/// evaluate through [`embedded_forward`] instead.
pub const DENSE_NET_ELEMENT_LIMIT: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeError {
    ShapeMismatch(String),
    /// Subset `i` of a CPWL description is empty.
    EmptySubset(usize),
    /// Requested sizes exceed what can be represented or materialized.
    TooLarge(String),
    BadDescription(String),
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeError::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            LatticeError::EmptySubset(i) => write!(f, "subset {i} is empty"),
            LatticeError::TooLarge(s) => write!(f, "architecture too large: {s}"),
            LatticeError::BadDescription(s) => write!(f, "bad description: {s}"),
        }
    }
}

impl std::error::Error for LatticeError {}

/// What a layer does within the overall architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    /// Fully-connected layer computing routed local functions. The 0/1
    /// routing (selector) layer is folded into it: composing two linear
    /// maps is linear, and the fold costs the downstream trainer nothing.
    Linear,
    /// A pure 0/1 routing layer with one-hot rows. Not emitted by the
    /// folded construction; kept for completeness of the format.
    Selector,
    MinStage,
    MaxStage,
    /// Single-layer degenerate case: the function is affine.
    Output,
}

impl LayerRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerRole::Linear => "linear",
            LayerRole::Selector => "selector",
            LayerRole::MinStage => "min-stage",
            LayerRole::MaxStage => "max-stage",
            LayerRole::Output => "output",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "linear" => LayerRole::Linear,
            "selector" => LayerRole::Selector,
            "min-stage" => LayerRole::MinStage,
            "max-stage" => LayerRole::MaxStage,
            "output" => LayerRole::Output,
            _ => return None,
        })
    }
}

/// One layer of an architecture: sizes, role, and whether a ReLU follows.
/// Dimensions are u128 because inferred architectures can outgrow usize
/// long before they stop being worth reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: u128,
    pub out_dim: u128,
    pub role: LayerRole,
    pub has_activation: bool,
}

/// An architecture: the layer-size list plus the counts it was derived
/// from. `n_local` and `n_order` are the local-function and unique-order
/// bounds the lattice construction was sized for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchDescriptor {
    pub layers: Vec<LayerSpec>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub n_local: BigUint,
    pub n_order: BigUint,
    pub parameter_count: BigUint,
    pub resource_warning: bool,
}

impl ArchDescriptor {
    /// Composability: each layer consumes exactly what the previous
    /// produced, and the ends match the declared input/output sizes.
    pub fn is_composable(&self) -> bool {
        if self.layers.is_empty() {
            return false;
        }
        if self.layers[0].in_dim != self.input_dim as u128 {
            return false;
        }
        if self.layers.last().unwrap().out_dim != self.output_dim as u128 {
            return false;
        }
        self.layers
            .windows(2)
            .all(|w| w[0].out_dim == w[1].in_dim)
    }

    /// Layer dims as machine sizes, or an error if anything overflows.
    pub fn materialized_dims(&self) -> Result<Vec<(usize, usize, bool)>, LatticeError> {
        self.layers
            .iter()
            .map(|l| {
                let i = usize::try_from(l.in_dim)
                    .map_err(|_| LatticeError::TooLarge(format!("layer in_dim {}", l.in_dim)))?;
                let o = usize::try_from(l.out_dim)
                    .map_err(|_| LatticeError::TooLarge(format!("layer out_dim {}", l.out_dim)))?;
                Ok((i, o, l.has_activation))
            })
            .collect()
    }

    /// Whether `net`'s layers have exactly these sizes and activations.
    pub fn matches_net(&self, net: &WeightedNet) -> bool {
        match self.materialized_dims() {
            Err(_) => false,
            Ok(dims) => {
                dims.len() == net.layers.len()
                    && dims.iter().zip(&net.layers).all(|((i, o, act), layer)| {
                        layer.weight.ncols() == *i
                            && layer.weight.nrows() == *o
                            && layer.has_activation == *act
                    })
            }
        }
    }
}

/// One concrete layer: `z -> max(Wz + b, 0)`, or `Wz + b` where the
/// activation is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub has_activation: bool,
}

/// A fully-weighted ReLU network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNet {
    pub layers: Vec<Layer>,
}

impl WeightedNet {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize, bool)> {
        self.layers
            .iter()
            .map(|l| (l.weight.ncols(), l.weight.nrows(), l.has_activation))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

/// Evaluate the network layer by layer.
pub fn forward(net: &WeightedNet, x: &DVector<f64>) -> Result<DVector<f64>, LatticeError> {
    let mut z = x.clone();
    for (idx, layer) in net.layers.iter().enumerate() {
        if layer.weight.ncols() != z.len() {
            return Err(LatticeError::ShapeMismatch(format!(
                "layer {idx} expects {} inputs, got {}",
                layer.weight.ncols(),
                z.len()
            )));
        }
        z = &layer.weight * z + &layer.bias;
        if layer.has_activation {
            z.apply(|v| *v = v.max(0.0));
        }
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Combine {
    Min,
    Max,
}

/// The exact two-input max network: Arch = ((2,4),(4,1)), no activation on
/// the last layer, computing `max{a,b} = (a+b)/2 + |a-b|/2` for all reals.
pub fn max2_weights() -> WeightedNet {
    WeightedNet {
        layers: build_cascade(1, 2, 1, Combine::Max),
    }
}

/// The exact two-input min network: `min{a,b} = (a+b)/2 - |a-b|/2`.
pub fn min2_weights() -> WeightedNet {
    WeightedNet {
        layers: build_cascade(1, 2, 1, Combine::Min),
    }
}

/// Exact N-input max network weights (N = 1 is the empty identity net).
pub fn maxn_weights(n: usize) -> WeightedNet {
    assert!(n >= 1);
    WeightedNet {
        layers: build_cascade(1, n, 1, Combine::Max),
    }
}

/// Exact N-input min network weights.
pub fn minn_weights(n: usize) -> WeightedNet {
    assert!(n >= 1);
    WeightedNet {
        layers: build_cascade(1, n, 1, Combine::Min),
    }
}

/// Stage widths of the ceil-halving reduction from `width` inputs to 1:
/// pairs (inputs, units). An input of 5 gives (5,3), (3,2), (2,1).
pub fn cascade_stage_widths(width: u128) -> Vec<(u128, u128)> {
    let mut out = Vec::new();
    let mut w = width;
    while w > 1 {
        let u = w.div_ceil(2);
        out.push((w, u));
        w = u;
    }
    out
}

/// Architecture of the N-input max network: parallel two-input blocks in a
/// divide-and-conquer cascade, replicating an input within a stage whenever
/// the width is odd. N = 1 yields the identity (no layers).
pub fn maxn_arch(n: u128) -> ArchDescriptor {
    cascade_arch(n, Combine::Max)
}

/// Architecture of the N-input min network; same sizes as [`maxn_arch`].
pub fn minn_arch(n: u128) -> ArchDescriptor {
    cascade_arch(n, Combine::Min)
}

fn cascade_arch(n: u128, comb: Combine) -> ArchDescriptor {
    assert!(n >= 1, "cascade needs at least one input");
    let role = match comb {
        Combine::Min => LayerRole::MinStage,
        Combine::Max => LayerRole::MaxStage,
    };
    let mut layers = Vec::new();
    for (w, u) in cascade_stage_widths(n) {
        layers.push(LayerSpec {
            in_dim: w,
            out_dim: 4 * u,
            role,
            has_activation: true,
        });
        layers.push(LayerSpec {
            in_dim: 4 * u,
            out_dim: u,
            role,
            has_activation: false,
        });
    }
    let parameter_count = layers
        .iter()
        .map(|l| BigUint::from(l.in_dim) * BigUint::from(l.out_dim) + BigUint::from(l.out_dim))
        .sum();
    ArchDescriptor {
        layers,
        input_dim: n.try_into().unwrap_or(usize::MAX),
        output_dim: 1,
        n_local: BigUint::from(n),
        n_order: BigUint::one(),
        parameter_count,
        resource_warning: false,
    }
}

/// Per-stage unit counts of the N-input cascade, e.g. 5 -> [3, 2, 1].
pub fn cascade_unit_counts(n: u128) -> Vec<u128> {
    cascade_stage_widths(n).into_iter().map(|(_, u)| u).collect()
}

fn checked_mul(a: u128, b: u128, what: &str) -> Result<u128, LatticeError> {
    a.checked_mul(b)
        .ok_or_else(|| LatticeError::TooLarge(format!("{what} overflows")))
}

/// Layer sizes of the lattice network for `n_funcs` local functions,
/// `n_subsets` min blocks, input dimension `n` and output dimension `m`.
/// Shared by [`infer_architecture`] and the weight assembly so shapes can
/// never drift apart.
fn lattice_layer_specs(
    n_funcs: u128,
    n_subsets: u128,
    n: u128,
    m: u128,
) -> Result<Vec<LayerSpec>, LatticeError> {
    if n_funcs == 0 || n_subsets == 0 || n == 0 || m == 0 {
        return Err(LatticeError::BadDescription(
            "all sizes must be at least 1".into(),
        ));
    }
    if n_funcs == 1 && n_subsets == 1 {
        return Ok(vec![LayerSpec {
            in_dim: n,
            out_dim: m,
            role: LayerRole::Output,
            has_activation: false,
        }]);
    }
    let mut layers = Vec::new();
    let fan = checked_mul(checked_mul(m, n_funcs, "m*N")?, n_subsets, "m*N*M")?;
    layers.push(LayerSpec {
        in_dim: n,
        out_dim: fan,
        role: LayerRole::Linear,
        has_activation: false,
    });
    // M parallel element-wise min cascades over N m-vector slots.
    let min_scale = checked_mul(m, n_subsets, "m*M")?;
    for (w, u) in cascade_stage_widths(n_funcs) {
        layers.push(LayerSpec {
            in_dim: checked_mul(min_scale, w, "min stage")?,
            out_dim: checked_mul(min_scale, 4 * u, "min stage")?,
            role: LayerRole::MinStage,
            has_activation: true,
        });
        layers.push(LayerSpec {
            in_dim: checked_mul(min_scale, 4 * u, "min stage")?,
            out_dim: checked_mul(min_scale, u, "min stage")?,
            role: LayerRole::MinStage,
            has_activation: false,
        });
    }
    // One element-wise max cascade over the M block outputs.
    for (w, u) in cascade_stage_widths(n_subsets) {
        layers.push(LayerSpec {
            in_dim: checked_mul(m, w, "max stage")?,
            out_dim: checked_mul(m, 4 * u, "max stage")?,
            role: LayerRole::MaxStage,
            has_activation: true,
        });
        layers.push(LayerSpec {
            in_dim: checked_mul(m, 4 * u, "max stage")?,
            out_dim: checked_mul(m, u, "max stage")?,
            role: LayerRole::MaxStage,
            has_activation: false,
        });
    }
    Ok(layers)
}

/// Size a ReLU architecture guaranteed to admit an exact weight assignment
/// for any CPWL function with at most `n_est` local linear functions and
/// `m_est` unique-order regions, mapping `n` inputs to `m` outputs.
///
/// Fails with [`LatticeError::TooLarge`] when the layer sizes do not fit in
/// 128 bits; sets `resource_warning` (non-fatally) when the parameter count
/// exceeds [`PARAM_WARNING_THRESHOLD`].
pub fn infer_architecture(
    n_est: &BigUint,
    m_est: &BigUint,
    n: usize,
    m: usize,
) -> Result<ArchDescriptor, LatticeError> {
    if n_est.is_zero() || m_est.is_zero() {
        return Err(LatticeError::BadDescription(
            "counts must be at least 1".into(),
        ));
    }
    let nf = n_est
        .to_u128()
        .ok_or_else(|| LatticeError::TooLarge(format!("N = {n_est}")))?;
    let ns = m_est
        .to_u128()
        .ok_or_else(|| LatticeError::TooLarge(format!("M = {m_est}")))?;
    let layers = lattice_layer_specs(nf, ns, n as u128, m as u128)?;
    let parameter_count: BigUint = layers
        .iter()
        .map(|l| BigUint::from(l.in_dim) * BigUint::from(l.out_dim) + BigUint::from(l.out_dim))
        .sum();
    let resource_warning = parameter_count > BigUint::from(PARAM_WARNING_THRESHOLD);
    Ok(ArchDescriptor {
        layers,
        input_dim: n,
        output_dim: m,
        n_local: n_est.clone(),
        n_order: m_est.clone(),
        parameter_count,
        resource_warning,
    })
}

/// A scalar CPWL function in two-level lattice form: local affine functions
/// `l_j` and index subsets `s_i` (0-based) with
/// `f(x) = max_i min_{j in s_i} l_j(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpwlDescription {
    /// (gain, offset) per local function.
    pub local_functions: Vec<(DVector<f64>, f64)>,
    pub subsets: Vec<BTreeSet<usize>>,
}

impl CpwlDescription {
    pub fn input_dim(&self) -> usize {
        self.local_functions.first().map_or(0, |(g, _)| g.len())
    }

    pub fn n_funcs(&self) -> usize {
        self.local_functions.len()
    }

    pub fn n_subsets(&self) -> usize {
        self.subsets.len()
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.local_functions.is_empty() {
            return Err(LatticeError::BadDescription("no local functions".into()));
        }
        if self.subsets.is_empty() {
            return Err(LatticeError::BadDescription("no subsets".into()));
        }
        let n = self.input_dim();
        if self.local_functions.iter().any(|(g, _)| g.len() != n) {
            return Err(LatticeError::ShapeMismatch(
                "local function gains differ in length".into(),
            ));
        }
        for (i, s) in self.subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(LatticeError::EmptySubset(i));
            }
            if s.iter().any(|&j| j >= self.n_funcs()) {
                return Err(LatticeError::BadDescription(format!(
                    "subset {i} references a missing function"
                )));
            }
        }
        Ok(())
    }

    /// Reference evaluation of the lattice form, straight from the
    /// definition.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&j| {
                        let (g, b) = &self.local_functions[j];
                        g.dot(x) + b
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// An assembled lattice network together with the counts that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeNet {
    pub net: WeightedNet,
    pub input_dim: usize,
    pub output_dim: usize,
    pub n_funcs: usize,
    pub n_subsets: usize,
}

/// Assemble exact network weights for a scalar CPWL description.
pub fn assemble_lattice_net(desc: &CpwlDescription) -> Result<LatticeNet, LatticeError> {
    assemble_vector_lattice_net(std::slice::from_ref(desc))
}

/// Assemble exact network weights for a vector-valued CPWL function given
/// per-channel lattice descriptions.
///
/// Channels are padded to a common block width N (the largest function
/// count) and block count M (the largest subset count): a subset shorter
/// than N fills its remaining min-block slots with copies of its largest
/// member, and a channel with fewer than M subsets repeats its last subset.
/// Neither padding changes the max-min value.
pub fn assemble_vector_lattice_net(
    channels: &[CpwlDescription],
) -> Result<LatticeNet, LatticeError> {
    if channels.is_empty() {
        return Err(LatticeError::BadDescription("no output channels".into()));
    }
    let m = channels.len();
    let n = channels[0].input_dim();
    for (c, d) in channels.iter().enumerate() {
        d.validate()?;
        if d.input_dim() != n {
            return Err(LatticeError::ShapeMismatch(format!(
                "channel {c} has input dim {} != {n}",
                d.input_dim()
            )));
        }
    }
    let n_funcs = channels.iter().map(|d| d.n_funcs()).max().unwrap();
    let n_subsets = channels.iter().map(|d| d.n_subsets()).max().unwrap();

    let specs = lattice_layer_specs(n_funcs as u128, n_subsets as u128, n as u128, m as u128)?;

    // First layer: routed local functions, the 0/1 selector folded into the
    // gains. Row (block i, slot j, channel c) carries l^c at routed(c,i,j).
    let fan = n_funcs * n_subsets * m;
    let mut w1 = DMatrix::zeros(fan, n);
    let mut b1 = DVector::zeros(fan);
    for i in 0..n_subsets {
        for j in 0..n_funcs {
            for c in 0..m {
                let func = routed_function(&channels[c], i, j);
                let (g, b) = &channels[c].local_functions[func];
                let row = (i * n_funcs + j) * m + c;
                w1.row_mut(row).copy_from(&g.transpose());
                b1[row] = *b;
            }
        }
    }

    let mut layers = vec![Layer {
        weight: w1,
        bias: b1,
        has_activation: false,
    }];
    layers.extend(build_cascade(n_subsets, n_funcs, m, Combine::Min));
    layers.extend(build_cascade(1, n_subsets, m, Combine::Max));

    let net = WeightedNet { layers };
    let lattice = LatticeNet {
        net,
        input_dim: n,
        output_dim: m,
        n_funcs,
        n_subsets,
    };
    debug_assert!(conforms(&lattice, &specs));
    Ok(lattice)
}

/// Index of the local function routed to (block, slot) of a channel:
/// the slot-th smallest member of the subset, or the largest member
/// replicated once the subset is exhausted.
fn routed_function(channel: &CpwlDescription, block: usize, slot: usize) -> usize {
    let subset = &channel.subsets[block.min(channel.n_subsets() - 1)];
    let sorted: Vec<usize> = subset.iter().copied().collect();
    if slot < sorted.len() {
        sorted[slot]
    } else {
        *sorted.last().unwrap()
    }
}

/// The one-hot routing matrix the folded first layer implicitly applies:
/// `m*N*M` rows, one per (block, slot, channel), each selecting a single
/// local-function output. Every row is one-hot by construction; exposed so
/// the selector discipline stays checkable.
pub fn routing_matrix(channels: &[CpwlDescription]) -> Result<DMatrix<f64>, LatticeError> {
    if channels.is_empty() {
        return Err(LatticeError::BadDescription("no output channels".into()));
    }
    let m = channels.len();
    for d in channels {
        d.validate()?;
    }
    let n_funcs = channels.iter().map(|d| d.n_funcs()).max().unwrap();
    let n_subsets = channels.iter().map(|d| d.n_subsets()).max().unwrap();
    // Columns enumerate (function j, channel c) pairs.
    let mut r = DMatrix::zeros(n_funcs * n_subsets * m, n_funcs * m);
    for i in 0..n_subsets {
        for j in 0..n_funcs {
            for c in 0..m {
                let func = routed_function(&channels[c], i, j);
                r[((i * n_funcs + j) * m + c, func * m + c)] = 1.0;
            }
        }
    }
    Ok(r)
}

/// `groups` parallel element-wise cascades, each reducing `width` m-vector
/// slots to a single m-vector with two-input min/max blocks. Odd widths
/// replicate the trailing slot into both block inputs, which the block
/// weights turn into the identity on that value.
fn build_cascade(groups: usize, width: usize, m: usize, comb: Combine) -> Vec<Layer> {
    let tail_sign = match comb {
        Combine::Max => 0.5,
        Combine::Min => -0.5,
    };
    let mut layers = Vec::new();
    let mut w = width;
    while w > 1 {
        let u = w.div_ceil(2);
        let in_dim = groups * w * m;
        let mid_dim = groups * u * m * 4;
        let mut split = DMatrix::zeros(mid_dim, in_dim);
        let mut combine = DMatrix::zeros(groups * u * m, mid_dim);
        for gi in 0..groups {
            for p in 0..u {
                for c in 0..m {
                    let left = (gi * w + 2 * p) * m + c;
                    let right = (gi * w + (2 * p + 1).min(w - 1)) * m + c;
                    let base = ((gi * u + p) * m + c) * 4;
                    // (a+b), (-a-b), (-a+b), (a-b); a replicated input
                    // collapses the pair to (2a, -2a, 0, 0).
                    split[(base, left)] += 1.0;
                    split[(base, right)] += 1.0;
                    split[(base + 1, left)] -= 1.0;
                    split[(base + 1, right)] -= 1.0;
                    split[(base + 2, left)] -= 1.0;
                    split[(base + 2, right)] += 1.0;
                    split[(base + 3, left)] += 1.0;
                    split[(base + 3, right)] -= 1.0;

                    let out_row = (gi * u + p) * m + c;
                    combine[(out_row, base)] = 0.5;
                    combine[(out_row, base + 1)] = -0.5;
                    combine[(out_row, base + 2)] = tail_sign;
                    combine[(out_row, base + 3)] = tail_sign;
                }
            }
        }
        layers.push(Layer {
            weight: split,
            bias: DVector::zeros(mid_dim),
            has_activation: true,
        });
        layers.push(Layer {
            weight: combine,
            bias: DVector::zeros(groups * u * m),
            has_activation: false,
        });
        w = u;
    }
    layers
}

fn conforms(net: &LatticeNet, specs: &[LayerSpec]) -> bool {
    let dims = net.net.layer_dims();
    dims.len() == specs.len()
        && dims.iter().zip(specs).all(|((i, o, act), s)| {
            *i as u128 == s.in_dim && *o as u128 == s.out_dim && *act == s.has_activation
        })
}

/// Embed an exact lattice network into the larger architecture sized for
/// `target_funcs >= n_funcs` and `target_subsets >= n_subsets`, preserving
/// its outputs everywhere.
///
/// Extra min-block slots duplicate the block's last routed function and
/// extra blocks duplicate the last block, so the min/max values are
/// untouched. Zero-filling instead would change them.
pub fn embed(
    smaller: &LatticeNet,
    target_funcs: usize,
    target_subsets: usize,
) -> Result<LatticeNet, LatticeError> {
    validate_lattice_shape(smaller)?;
    if target_funcs < smaller.n_funcs || target_subsets < smaller.n_subsets {
        return Err(LatticeError::ShapeMismatch(format!(
            "target ({target_funcs},{target_subsets}) smaller than source ({},{})",
            smaller.n_funcs, smaller.n_subsets
        )));
    }
    let n = smaller.input_dim;
    let m = smaller.output_dim;
    let (sn, sm) = (smaller.n_funcs, smaller.n_subsets);
    let specs = lattice_layer_specs(
        target_funcs as u128,
        target_subsets as u128,
        n as u128,
        m as u128,
    )?;
    let dims_ok = specs
        .iter()
        .all(|s| usize::try_from(s.in_dim).is_ok() && usize::try_from(s.out_dim).is_ok());
    if !dims_ok {
        return Err(LatticeError::TooLarge(
            "embedded network does not fit in memory-sized dimensions".into(),
        ));
    }
    let total_elements: u128 = specs
        .iter()
        .map(|s| s.in_dim.saturating_mul(s.out_dim))
        .fold(0u128, u128::saturating_add);
    if total_elements > DENSE_NET_ELEMENT_LIMIT {
        return Err(LatticeError::TooLarge(format!(
            "dense embedding needs {total_elements} weight elements; evaluate lazily instead"
        )));
    }

    if target_funcs == 1 && target_subsets == 1 {
        // Degenerate into degenerate: only possible when the source is the
        // single affine layer already.
        return Ok(smaller.clone());
    }

    let src0 = &smaller.net.layers[0];
    let fan = target_funcs * target_subsets * m;
    let mut w1 = DMatrix::zeros(fan, n);
    let mut b1 = DVector::zeros(fan);
    for i in 0..target_subsets {
        for j in 0..target_funcs {
            for c in 0..m {
                let src_row = (i.min(sm - 1) * sn + j.min(sn - 1)) * m + c;
                let row = (i * target_funcs + j) * m + c;
                w1.row_mut(row).copy_from(&src0.weight.row(src_row));
                b1[row] = src0.bias[src_row];
            }
        }
    }
    let mut layers = vec![Layer {
        weight: w1,
        bias: b1,
        has_activation: false,
    }];
    layers.extend(build_cascade(target_subsets, target_funcs, m, Combine::Min));
    layers.extend(build_cascade(1, target_subsets, m, Combine::Max));
    let out = LatticeNet {
        net: WeightedNet { layers },
        input_dim: n,
        output_dim: m,
        n_funcs: target_funcs,
        n_subsets: target_subsets,
    };
    debug_assert!(conforms(&out, &specs));
    Ok(out)
}

/// Evaluate the network [`embed`] would produce, without materializing its
/// weights: block-diagonal cascade layers apply the same arithmetic whether
/// stored densely or walked block by block, and duplicated first-layer rows
/// are read from the source. Agrees with `forward(embed(..), x)` exactly;
/// exists because inferred targets can be far too large to store.
pub fn embedded_forward(
    smaller: &LatticeNet,
    target_funcs: usize,
    target_subsets: usize,
    x: &DVector<f64>,
) -> Result<DVector<f64>, LatticeError> {
    validate_lattice_shape(smaller)?;
    if target_funcs < smaller.n_funcs || target_subsets < smaller.n_subsets {
        return Err(LatticeError::ShapeMismatch(format!(
            "target ({target_funcs},{target_subsets}) smaller than source ({},{})",
            smaller.n_funcs, smaller.n_subsets
        )));
    }
    if x.len() != smaller.input_dim {
        return Err(LatticeError::ShapeMismatch(format!(
            "input has length {}, expected {}",
            x.len(),
            smaller.input_dim
        )));
    }
    let m = smaller.output_dim;
    let (sn, sm) = (smaller.n_funcs, smaller.n_subsets);
    if target_funcs == 1 && target_subsets == 1 {
        return forward(&smaller.net, x);
    }
    let src0 = &smaller.net.layers[0];
    let v = &src0.weight * x + &src0.bias;

    // Every embedded block past the source's last repeats it, and every
    // slot past a block's last repeats that slot, so the cascades run over
    // value lists with long constant tails. cascade_eval collapses those
    // tails exactly, making the evaluation O(source size) per sample no
    // matter how large the target is.
    let mut out = DVector::zeros(m);
    for c in 0..m {
        let mut block_vals = Vec::with_capacity(sm);
        for i in 0..sm {
            let slots: Vec<f64> = (0..sn).map(|j| v[(i * sn + j) * m + c]).collect();
            block_vals.push(cascade_eval(slots, target_funcs - sn, Combine::Min));
        }
        out[c] = cascade_eval(block_vals, target_subsets - sm, Combine::Max);
    }
    Ok(out)
}

/// Scalar cascade evaluation mirroring the block weights arithmetic
/// operation for operation, on the value list `head` followed by
/// `tail_len` copies of its last element.
///
/// Replicated pairs pass through the block identity exactly: the block
/// arithmetic on (t, t) is 0.5*max(2t,0) - 0.5*max(-2t,0) = t with no
/// rounding, since doubling and halving are exact. A constant tail therefore
/// stays a constant tail of the same value from stage to stage, and only
/// its length needs tracking.
fn cascade_eval(head: Vec<f64>, tail_len: usize, comb: Combine) -> f64 {
    let tail_sign = match comb {
        Combine::Max => 0.5,
        Combine::Min => -0.5,
    };
    let block = |a: f64, b: f64| -> f64 {
        let h0 = (a + b).max(0.0);
        let h1 = (-a - b).max(0.0);
        let h2 = (-a + b).max(0.0);
        let h3 = (a - b).max(0.0);
        0.5 * h0 - 0.5 * h1 + tail_sign * h2 + tail_sign * h3
    };
    let mut head = head;
    let mut tail_len = tail_len;
    loop {
        let h = head.len();
        assert!(h >= 1, "cascade over an empty list");
        let w = h + tail_len;
        if w == 1 {
            return head[0];
        }
        let tail = *head.last().expect("cascade head is nonempty");
        let u = w.div_ceil(2);
        // Pairs with their left slot in the head get evaluated; the
        // remaining pairs read the tail twice and are exactly t each, so
        // only their count matters. Never loop over the tail: its length
        // can be astronomically larger than the head.
        let head_pairs = h.div_ceil(2).min(u);
        let mut next = Vec::with_capacity(head_pairs + 1);
        for p in 0..head_pairs {
            let left = 2 * p;
            let right = (2 * p + 1).min(w - 1);
            let value = if left == right {
                // Odd overall width: the last element pairs with itself,
                // which the doubled weights reduce to the identity.
                head[left]
            } else if right >= h {
                block(head[left], tail)
            } else {
                block(head[left], head[right])
            };
            next.push(value);
        }
        let mut next_tail = u - head_pairs;
        if next_tail > 0 {
            next.push(tail);
            next_tail -= 1;
        }
        head = next;
        tail_len = next_tail;
    }
}

/// Checks a net against the shape `lattice_layer_specs` prescribes for its
/// recorded counts.
fn validate_lattice_shape(net: &LatticeNet) -> Result<(), LatticeError> {
    let specs = lattice_layer_specs(
        net.n_funcs as u128,
        net.n_subsets as u128,
        net.input_dim as u128,
        net.output_dim as u128,
    )?;
    if !conforms(net, &specs) {
        return Err(LatticeError::ShapeMismatch(
            "network does not conform to its recorded lattice shape".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn vec1(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn eval1(net: &WeightedNet, inputs: &[f64]) -> f64 {
        forward(net, &DVector::from_column_slice(inputs)).unwrap()[0]
    }

    #[test]
    fn max2_min2_basics() {
        let mx = max2_weights();
        let mn = min2_weights();
        assert_eq!(mx.layer_dims(), vec![(2, 4, true), (4, 1, false)]);
        assert_eq!(mn.layer_dims(), vec![(2, 4, true), (4, 1, false)]);
        assert_eq!(eval1(&mx, &[3.0, 5.0]), 5.0);
        assert_eq!(eval1(&mn, &[3.0, 5.0]), 3.0);
        assert_eq!(eval1(&mx, &[-7.0, 4.0]), 4.0);
        // Ties are exact.
        assert_eq!(eval1(&mx, &[2.5, 2.5]), 2.5);
        assert_eq!(eval1(&mn, &[-2.5, -2.5]), -2.5);
    }

    #[test]
    fn max2_block_weights_are_pinned() {
        let mx = max2_weights();
        let w1 = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0]);
        let w2 = DMatrix::from_row_slice(1, 4, &[0.5, -0.5, 0.5, 0.5]);
        assert_eq!(mx.layers[0].weight, w1);
        assert_eq!(mx.layers[1].weight, w2);
        assert!(mx.layers[0].bias.iter().all(|&b| b == 0.0));
        assert!(mx.layers[1].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn two_input_blocks_on_random_pairs() {
        let mx = max2_weights();
        let mn = min2_weights();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = rng.random_range(-1e6..1e6);
            let b = rng.random_range(-1e6..1e6);
            assert!((eval1(&mx, &[a, b]) - a.max(b)).abs() <= 1e-9);
            assert!((eval1(&mn, &[a, b]) - a.min(b)).abs() <= 1e-9);
        }
    }

    #[test]
    fn cascade_stage_unit_counts() {
        assert_eq!(cascade_unit_counts(5), vec![3, 2, 1]);
        assert_eq!(cascade_unit_counts(8), vec![4, 2, 1]);
        assert_eq!(cascade_unit_counts(2), vec![1]);
        assert!(cascade_unit_counts(1).is_empty());
    }

    #[test]
    fn maxn_arch_shapes() {
        let five = maxn_arch(5);
        let dims: Vec<(u128, u128)> = five.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect();
        assert_eq!(
            dims,
            vec![(5, 12), (12, 3), (3, 8), (8, 2), (2, 4), (4, 1)]
        );
        assert!(five.is_composable());

        let two = maxn_arch(2);
        let dims: Vec<(u128, u128)> = two.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect();
        assert_eq!(dims, vec![(2, 4), (4, 1)]);

        assert!(maxn_arch(1).layers.is_empty());
    }

    #[test]
    fn multi_input_cascades_are_exact() {
        let mut rng = StdRng::seed_from_u64(2);
        for n in [2usize, 3, 5, 8] {
            let layers = build_cascade(1, n, 1, Combine::Max);
            let net = WeightedNet { layers };
            let min_net = WeightedNet {
                layers: build_cascade(1, n, 1, Combine::Min),
            };
            for _ in 0..500 {
                let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
                let want_max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let want_min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!((eval1(&net, &vals) - want_max).abs() <= 1e-9);
                assert!((eval1(&min_net, &vals) - want_min).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn forward_trivia() {
        let zero = WeightedNet {
            layers: vec![Layer {
                weight: DMatrix::zeros(2, 3),
                bias: DVector::zeros(2),
                has_activation: true,
            }],
        };
        let out = forward(&zero, &DVector::from_column_slice(&[1.0, -2.0, 3.0])).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));

        let w = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        let lin = WeightedNet {
            layers: vec![Layer {
                weight: w,
                bias: DVector::from_element(1, 0.5),
                has_activation: false,
            }],
        };
        let out = forward(&lin, &DVector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(out[0], 1.5);

        assert!(matches!(
            forward(&lin, &DVector::from_column_slice(&[1.0])),
            Err(LatticeError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn infer_architecture_small_example() {
        let d = infer_architecture(&BigUint::from(2u32), &BigUint::from(2u32), 1, 1).unwrap();
        let dims: Vec<(u128, u128)> = d.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect();
        assert_eq!(dims, vec![(1, 4), (4, 8), (8, 2), (2, 4), (4, 1)]);
        assert!(d.is_composable());
        assert_eq!(d.layers[0].role, LayerRole::Linear);
        assert_eq!(d.layers[1].role, LayerRole::MinStage);
        assert_eq!(d.layers[3].role, LayerRole::MaxStage);
        assert!(!d.layers[2].has_activation);
        assert!(!d.layers[4].has_activation);
    }

    #[test]
    fn infer_architecture_degenerate_and_vector_cases() {
        let affine = infer_architecture(&BigUint::one(), &BigUint::one(), 3, 2).unwrap();
        assert_eq!(affine.layers.len(), 1);
        assert_eq!(affine.layers[0].in_dim, 3);
        assert_eq!(affine.layers[0].out_dim, 2);
        assert_eq!(affine.layers[0].role, LayerRole::Output);

        let scalar = infer_architecture(&BigUint::from(2u32), &BigUint::from(2u32), 1, 1).unwrap();
        let doubled = infer_architecture(&BigUint::from(2u32), &BigUint::from(2u32), 1, 2).unwrap();
        for (s, d) in scalar.layers.iter().zip(doubled.layers.iter()).skip(1) {
            assert_eq!(2 * s.in_dim, d.in_dim);
            assert_eq!(2 * s.out_dim, d.out_dim);
        }
        assert_eq!(doubled.layers[0].out_dim, 2 * scalar.layers[0].out_dim);
    }

    #[test]
    fn infer_architecture_rejects_unrepresentable_sizes() {
        let huge = BigUint::one() << 200;
        assert!(matches!(
            infer_architecture(&huge, &BigUint::one(), 2, 1),
            Err(LatticeError::TooLarge(_))
        ));
    }

    fn cpwl_example() -> CpwlDescription {
        // f(x) = 2x+3 for x > 0, -2x+3 for x <= 0: the max of its two
        // local functions.
        CpwlDescription {
            local_functions: vec![(vec1(2.0), 3.0), (vec1(-2.0), 3.0)],
            subsets: vec![BTreeSet::from([0]), BTreeSet::from([1])],
        }
    }

    fn abs_description() -> CpwlDescription {
        CpwlDescription {
            local_functions: vec![(vec1(1.0), 0.0), (vec1(-1.0), 0.0)],
            subsets: vec![BTreeSet::from([0]), BTreeSet::from([1])],
        }
    }

    #[test]
    fn assemble_reproduces_the_vee_function() {
        let desc = cpwl_example();
        let net = assemble_lattice_net(&desc).unwrap();
        for k in 0..=1000 {
            let x = -5.0 + 10.0 * k as f64 / 1000.0;
            let want = if x > 0.0 { 2.0 * x + 3.0 } else { -2.0 * x + 3.0 };
            let got = forward(&net.net, &vec1(x)).unwrap()[0];
            assert!((got - want).abs() <= 1e-9, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn assemble_reproduces_abs() {
        let net = assemble_lattice_net(&abs_description()).unwrap();
        for k in 0..=1000 {
            let x = -5.0 + 10.0 * k as f64 / 1000.0;
            let got = forward(&net.net, &vec1(x)).unwrap()[0];
            assert!((got - x.abs()).abs() <= 1e-9);
        }
    }

    #[test]
    fn assemble_convex_three_piece_in_the_plane() {
        let mut rng = StdRng::seed_from_u64(3);
        let funcs: Vec<(DVector<f64>, f64)> = (0..3)
            .map(|_| {
                (
                    DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0)),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let desc = CpwlDescription {
            local_functions: funcs.clone(),
            subsets: (0..3).map(|j| BTreeSet::from([j])).collect(),
        };
        let net = assemble_lattice_net(&desc).unwrap();
        for _ in 0..10_000 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let want = funcs
                .iter()
                .map(|(g, b)| g.dot(&x) + b)
                .fold(f64::NEG_INFINITY, f64::max);
            let got = forward(&net.net, &x).unwrap()[0];
            assert!((got - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn assemble_handles_subsets_smaller_than_n() {
        // Three functions, subsets of mixed sizes; padding replicates the
        // largest member of each subset.
        let desc = CpwlDescription {
            local_functions: vec![(vec1(1.0), 0.0), (vec1(-1.0), 0.0), (vec1(0.0), 0.4)],
            subsets: vec![BTreeSet::from([0, 2]), BTreeSet::from([1])],
        };
        let net = assemble_lattice_net(&desc).unwrap();
        for k in 0..=400 {
            let x = -2.0 + 4.0 * k as f64 / 400.0;
            let want = desc.eval(&vec1(x));
            let got = forward(&net.net, &vec1(x)).unwrap()[0];
            assert!((got - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn routing_matrix_rows_are_one_hot() {
        let desc = cpwl_example();
        let r = routing_matrix(std::slice::from_ref(&desc)).unwrap();
        for i in 0..r.nrows() {
            let ones = (0..r.ncols()).filter(|&j| r[(i, j)] == 1.0).count();
            let zeros = (0..r.ncols()).filter(|&j| r[(i, j)] == 0.0).count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, r.ncols() - 1);
        }
    }

    #[test]
    fn empty_subset_is_rejected() {
        let desc = CpwlDescription {
            local_functions: vec![(vec1(1.0), 0.0)],
            subsets: vec![BTreeSet::new()],
        };
        assert!(matches!(
            assemble_lattice_net(&desc),
            Err(LatticeError::EmptySubset(0))
        ));
    }

    #[test]
    fn vector_assembly_stacks_channels() {
        let ch0 = abs_description();
        let ch1 = CpwlDescription {
            local_functions: vec![(vec1(0.5), 1.0)],
            subsets: vec![BTreeSet::from([0])],
        };
        let net = assemble_vector_lattice_net(&[ch0, ch1]).unwrap();
        assert_eq!(net.output_dim, 2);
        for k in 0..=100 {
            let x = -3.0 + 6.0 * k as f64 / 100.0;
            let out = forward(&net.net, &vec1(x)).unwrap();
            assert!((out[0] - x.abs()).abs() <= 1e-9);
            assert!((out[1] - (0.5 * x + 1.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn embed_preserves_outputs() {
        let net = assemble_lattice_net(&abs_description()).unwrap();
        let bigger = embed(&net, 3, 3).unwrap();
        assert_eq!(bigger.n_funcs, 3);
        assert_eq!(bigger.n_subsets, 3);
        for k in 0..=400 {
            let x = -5.0 + 10.0 * k as f64 / 400.0;
            let a = forward(&net.net, &vec1(x)).unwrap()[0];
            let b = forward(&bigger.net, &vec1(x)).unwrap()[0];
            assert!((a - b).abs() <= 1e-9, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn embed_into_same_shape_is_identity() {
        let net = assemble_lattice_net(&cpwl_example()).unwrap();
        let same = embed(&net, net.n_funcs, net.n_subsets).unwrap();
        assert_eq!(net.net, same.net);
    }

    #[test]
    fn embed_matches_inferred_architecture() {
        let net = assemble_lattice_net(&abs_description()).unwrap();
        let desc = infer_architecture(&BigUint::from(4u32), &BigUint::from(5u32), 1, 1).unwrap();
        let embedded = embed(&net, 4, 5).unwrap();
        assert!(desc.matches_net(&embedded.net));
    }

    #[test]
    fn zero_padding_would_be_wrong() {
        // Build the zero-filled variant of embed() by hand and exhibit a
        // probe point where it disagrees: a spurious 0 wins a min block.
        let small = assemble_lattice_net(&abs_description()).unwrap();
        let (tf, ts, m, n) = (3usize, 3usize, 1usize, 1usize);
        let src0 = &small.net.layers[0];
        let fan = tf * ts * m;
        let mut w1 = DMatrix::zeros(fan, n);
        let mut b1 = DVector::zeros(fan);
        for i in 0..ts {
            for j in 0..tf {
                for c in 0..m {
                    if i < small.n_subsets && j < small.n_funcs {
                        let src_row = (i * small.n_funcs + j) * m + c;
                        w1.row_mut((i * tf + j) * m + c)
                            .copy_from(&src0.weight.row(src_row));
                        b1[(i * tf + j) * m + c] = src0.bias[src_row];
                    }
                    // else: left at zero on purpose
                }
            }
        }
        let mut layers = vec![Layer {
            weight: w1,
            bias: b1,
            has_activation: false,
        }];
        layers.extend(build_cascade(ts, tf, m, Combine::Min));
        layers.extend(build_cascade(1, ts, m, Combine::Max));
        let zero_padded = WeightedNet { layers };

        let x = vec1(1.0);
        let right = forward(&small.net, &x).unwrap()[0];
        let wrong = forward(&zero_padded, &x).unwrap()[0];
        assert!((right - 1.0).abs() <= 1e-12);
        assert!(
            (wrong - right).abs() > 0.5,
            "zero padding should corrupt the output, got {wrong} vs {right}"
        );
    }

    #[test]
    fn lazy_embedded_forward_matches_dense() {
        let mut rng = StdRng::seed_from_u64(4);
        for (tf, ts) in [(2, 2), (3, 4), (5, 3), (4, 7), (9, 6), (16, 33), (7, 2)] {
            let net = assemble_lattice_net(&cpwl_example()).unwrap();
            let dense = embed(&net, tf, ts).unwrap();
            for _ in 0..200 {
                let x = vec1(rng.random_range(-8.0..8.0));
                let a = forward(&dense.net, &x).unwrap();
                let b = embedded_forward(&net, tf, ts, &x).unwrap();
                assert!(
                    (a - &b).abs().max() <= 1e-12 * (1.0 + b.abs().max()),
                    "lazy and dense embedded evaluation disagree at ({tf},{ts})"
                );
            }
        }
    }

    #[test]
    fn degenerate_affine_source_embeds() {
        // A single-piece (N = M = 1) description is one affine layer; it
        // must still lift into a full lattice architecture.
        let desc = CpwlDescription {
            local_functions: vec![(vec1(1.5), -0.25)],
            subsets: vec![BTreeSet::from([0])],
        };
        let net = assemble_lattice_net(&desc).unwrap();
        assert_eq!(net.net.layers.len(), 1);
        let dense = embed(&net, 3, 2).unwrap();
        for k in 0..=100 {
            let x = vec1(-2.0 + 4.0 * k as f64 / 100.0);
            let want = 1.5 * x[0] - 0.25;
            assert!((forward(&dense.net, &x).unwrap()[0] - want).abs() <= 1e-12);
            assert!((embedded_forward(&net, 3, 2, &x).unwrap()[0] - want).abs() <= 1e-12);
            assert!((embedded_forward(&net, 500, 10_000, &x).unwrap()[0] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn lazy_embedded_forward_matches_dense_vector_source() {
        let mut rng = StdRng::seed_from_u64(5);
        let ch0 = abs_description();
        let ch1 = CpwlDescription {
            local_functions: vec![(vec1(0.7), -0.2), (vec1(-0.3), 0.1), (vec1(0.0), 0.05)],
            subsets: vec![BTreeSet::from([0, 2]), BTreeSet::from([1])],
        };
        let net = assemble_vector_lattice_net(&[ch0, ch1]).unwrap();
        for (tf, ts) in [(3, 2), (4, 5), (8, 11)] {
            let dense = embed(&net, tf, ts).unwrap();
            for _ in 0..100 {
                let x = vec1(rng.random_range(-4.0..4.0));
                let a = forward(&dense.net, &x).unwrap();
                let b = embedded_forward(&net, tf, ts, &x).unwrap();
                assert!((a - &b).abs().max() <= 1e-12 * (1.0 + b.abs().max()));
            }
        }
    }

    #[test]
    fn descriptor_param_count_matches_materialized_net() {
        let desc = infer_architecture(&BigUint::from(3u32), &BigUint::from(2u32), 2, 1).unwrap();
        let funcs: Vec<(DVector<f64>, f64)> = vec![
            (DVector::from_column_slice(&[1.0, 0.0]), 0.0),
            (DVector::from_column_slice(&[0.0, 1.0]), 0.0),
            (DVector::from_column_slice(&[1.0, 1.0]), -0.5),
        ];
        let cp = CpwlDescription {
            local_functions: funcs,
            subsets: vec![BTreeSet::from([0, 1]), BTreeSet::from([2])],
        };
        let net = assemble_lattice_net(&cp).unwrap();
        assert!(desc.matches_net(&net.net));
        assert_eq!(
            desc.parameter_count,
            BigUint::from(net.net.parameter_count())
        );
    }
}
