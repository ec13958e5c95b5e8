//! Separability structures: which groupings of parties each decomposition term
//! factorises over.
//!
//! Parties are 0-based in code. The text descriptor uses 1-based party labels
//! with blocks separated by `|`, e.g. `cut:1|23`, `bisep`, `bisep-size:2`,
//! `trisep`, or an explicit list `bisep:1|23,2|13`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{compose, digits, ComplexMatrix};

/// One way of splitting the parties into blocks; each decomposition term is a
/// product of one pure state per block.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Blocks are sorted internally and ordered by their smallest party.
    pub fn new(blocks: Vec<Vec<usize>>) -> Self {
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b.first().copied().unwrap_or(usize::MAX));
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Checks the blocks are nonempty, disjoint and cover `0..parties`.
    pub fn validate(&self, parties: usize) -> Result<()> {
        let mut seen = vec![false; parties];
        for block in &self.blocks {
            if block.is_empty() {
                return Err(Error::InvalidStructure("empty block".into()));
            }
            for &p in block {
                if p >= parties {
                    return Err(Error::InvalidStructure(format!(
                        "party {} out of range for {parties} parties",
                        p + 1
                    )));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(Error::InvalidStructure(format!("party {} repeated", p + 1)));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidStructure(format!("party {} not covered", missing + 1)));
        }
        Ok(())
    }

    pub fn block_dims(&self, dims: &[usize]) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&p| dims[p]).product())
            .collect()
    }

    /// `perm[i]` is the canonical (party-ordered) basis index of basis vector
    /// `i` of `H_B1 ⊗ H_B2 ⊗ ...` taken in block order.
    pub fn block_order_permutation(&self, dims: &[usize]) -> Vec<usize> {
        let total: usize = dims.iter().product();
        let block_dims = self.block_dims(dims);
        let mut perm = vec![0; total];
        // Canonical index i has block sub-indices `subs`; its block-order index
        // is their mixed-radix composition.
        for (i, subs) in self.canonical_sub_indices(dims).chunks(self.blocks.len()).enumerate() {
            perm[compose(subs, &block_dims)] = i;
        }
        perm
    }

    /// For each canonical basis index, the sub-index within every block
    /// (row-major, `blocks().len()` entries per canonical index).
    pub fn canonical_sub_indices(&self, dims: &[usize]) -> Vec<usize> {
        let total: usize = dims.iter().product();
        let mut out = Vec::with_capacity(total * self.blocks.len());
        let mut dig = vec![0; dims.len()];
        for i in 0..total {
            digits(i, dims, &mut dig);
            for block in &self.blocks {
                let sub = block.iter().fold(0, |acc, &p| acc * dims[p] + dig[p]);
                out.push(sub);
            }
        }
        out
    }

    /// Product vector of one pure state per block, in canonical party order.
    pub fn product_vector(&self, dims: &[usize], states: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
        self.validate(dims.len())?;
        let block_dims = self.block_dims(dims);
        if states.len() != self.blocks.len()
            || states.iter().zip(&block_dims).any(|(s, &d)| s.len() != d)
        {
            return Err(Error::DimensionMismatch(format!(
                "block states do not match block dimensions {block_dims:?}"
            )));
        }
        let nb = self.blocks.len();
        Ok(self
            .canonical_sub_indices(dims)
            .chunks(nb)
            .map(|subs| subs.iter().zip(states).map(|(&j, s)| s[j]).product())
            .collect())
    }

    fn label(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|p| (p + 1).to_string()).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }

    fn parse(text: &str) -> Result<Self> {
        let blocks = text
            .split('|')
            .map(|b| {
                b.chars()
                    .map(|c| {
                        c.to_digit(10)
                            .filter(|&d| d >= 1)
                            .map(|d| d as usize - 1)
                            .ok_or_else(|| Error::Parse(format!("bad party label {c:?} in {text:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(blocks))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Reorders a matrix acting on `H_B1 ⊗ H_B2 ⊗ ...` (block order) into party order.
pub fn reorder_to_canonical(
    partition: &Partition,
    dims: &[usize],
    block_ordered: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    partition.validate(dims.len())?;
    let n: usize = dims.iter().product();
    if block_ordered.rows() != n || block_ordered.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, structure needs {n}x{n}",
            block_ordered.rows(),
            block_ordered.cols()
        )));
    }
    let perm = partition.block_order_permutation(dims);
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = block_ordered[(i, j)];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureKind {
    /// Product over every party.
    FullSep,
    /// Separable across one fixed cut; holds the 0-based parties on one side.
    FixedBipartition(Vec<usize>),
    /// Mixture over a list of bipartitions (all of them by default).
    Biseparable(Vec<Partition>),
    /// Mixture over bipartitions whose first side has exactly `m` parties.
    SizeConstrainedBisep(usize),
    /// Mixture over a list of three-block partitions (all of them by default).
    Triseparable(Vec<Partition>),
}

/// A separability notion instantiated on concrete local dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparabilityStructure {
    kind: StructureKind,
    dims: Vec<usize>,
    partitions: Vec<Partition>,
}

impl SeparabilityStructure {
    pub fn new(kind: StructureKind, dims: Vec<usize>) -> Result<Self> {
        let n = dims.len();
        if n < 2 {
            return Err(Error::InvalidStructure("need at least two parties".into()));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidStructure(format!("local dimensions {dims:?} must be >= 2")));
        }
        let partitions = match &kind {
            StructureKind::FullSep => vec![Partition::new((0..n).map(|p| vec![p]).collect())],
            StructureKind::FixedBipartition(side) => vec![complement_cut(side, n)?],
            StructureKind::Biseparable(list) if list.is_empty() => all_set_partitions(n, 2),
            StructureKind::Biseparable(list) => {
                if list.iter().any(|p| p.blocks().len() != 2) {
                    return Err(Error::InvalidStructure("biseparable cuts need two blocks".into()));
                }
                list.clone()
            }
            StructureKind::SizeConstrainedBisep(m) => {
                if *m == 0 || *m >= n {
                    return Err(Error::InvalidStructure(format!("part size {m} invalid for {n} parties")));
                }
                all_set_partitions(n, 2)
                    .into_iter()
                    .filter(|p| p.blocks().iter().any(|b| b.len() == *m))
                    .collect()
            }
            StructureKind::Triseparable(list) if list.is_empty() => {
                if n < 3 {
                    return Err(Error::InvalidStructure("triseparability needs three parties".into()));
                }
                all_set_partitions(n, 3)
            }
            StructureKind::Triseparable(list) => {
                if list.iter().any(|p| p.blocks().len() != 3) {
                    return Err(Error::InvalidStructure("triseparable partitions need three blocks".into()));
                }
                list.clone()
            }
        };
        if partitions.is_empty() {
            return Err(Error::InvalidStructure("no partitions".into()));
        }
        for p in &partitions {
            p.validate(n)?;
        }
        Ok(Self {
            kind,
            dims,
            partitions,
        })
    }

    pub fn full_sep(dims: Vec<usize>) -> Result<Self> {
        Self::new(StructureKind::FullSep, dims)
    }

    pub fn biseparable(dims: Vec<usize>) -> Result<Self> {
        Self::new(StructureKind::Biseparable(Vec::new()), dims)
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    /// Real outputs the network emits per index for partition `p`:
    /// one weight logit plus two reals per complex amplitude.
    pub fn outputs_for(&self, p: &Partition) -> usize {
        1 + p.block_dims(&self.dims).iter().map(|d| 2 * d).sum::<usize>()
    }

    pub fn outputs_per_index(&self) -> usize {
        self.partitions.iter().map(|p| self.outputs_for(p)).sum()
    }

    /// Text form accepted by [`SeparabilityStructure::parse`].
    pub fn descriptor(&self) -> String {
        let list = |ps: &[Partition]| ps.iter().map(|p| p.label()).collect::<Vec<_>>().join(",");
        match &self.kind {
            StructureKind::FullSep => "full".into(),
            StructureKind::FixedBipartition(_) => format!("cut:{}", self.partitions[0].label()),
            StructureKind::Biseparable(l) if l.is_empty() => "bisep".into(),
            StructureKind::Biseparable(l) => format!("bisep:{}", list(l)),
            StructureKind::SizeConstrainedBisep(m) => format!("bisep-size:{m}"),
            StructureKind::Triseparable(l) if l.is_empty() => "trisep".into(),
            StructureKind::Triseparable(l) => format!("trisep:{}", list(l)),
        }
    }

    pub fn parse(descriptor: &str, dims: Vec<usize>) -> Result<Self> {
        let (head, arg) = match descriptor.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (descriptor, None),
        };
        let parse_list = |a: &str| a.split(',').map(Partition::parse).collect::<Result<Vec<_>>>();
        let kind = match (head, arg) {
            ("full" | "fullsep", None) => StructureKind::FullSep,
            ("cut", Some(a)) => {
                let p = Partition::parse(a)?;
                if p.blocks().len() != 2 {
                    return Err(Error::InvalidStructure(format!("cut {a:?} needs exactly two sides")));
                }
                p.validate(dims.len())?;
                let first = p.blocks().first().cloned().unwrap_or_default();
                StructureKind::FixedBipartition(first)
            }
            ("bisep", None) => StructureKind::Biseparable(Vec::new()),
            ("bisep", Some(a)) => StructureKind::Biseparable(parse_list(a)?),
            ("bisep-size", Some(a)) => StructureKind::SizeConstrainedBisep(
                a.parse().map_err(|_| Error::Parse(format!("bad part size {a:?}")))?,
            ),
            ("trisep", None) => StructureKind::Triseparable(Vec::new()),
            ("trisep", Some(a)) => StructureKind::Triseparable(parse_list(a)?),
            _ => return Err(Error::Parse(format!("unknown structure {descriptor:?}"))),
        };
        Self::new(kind, dims)
    }
}

impl fmt::Display for SeparabilityStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

fn complement_cut(side: &[usize], n: usize) -> Result<Partition> {
    let rest: Vec<usize> = (0..n).filter(|p| !side.contains(p)).collect();
    if side.is_empty() || rest.is_empty() {
        return Err(Error::InvalidStructure("a cut needs two nonempty sides".into()));
    }
    let p = Partition::new(vec![side.to_vec(), rest]);
    p.validate(n)?;
    Ok(p)
}

/// All set partitions of `0..n` into exactly `blocks` nonempty blocks,
/// enumerated as restricted growth strings.
pub fn all_set_partitions(n: usize, blocks: usize) -> Vec<Partition> {
    fn rec(i: usize, n: usize, k: usize, labels: &mut Vec<usize>, used: usize, out: &mut Vec<Partition>) {
        if i == n {
            if used == k {
                let mut bs = vec![Vec::new(); k];
                for (p, &l) in labels.iter().enumerate() {
                    bs[l].push(p);
                }
                out.push(Partition::new(bs));
            }
            return;
        }
        // Not enough parties left to open the remaining blocks.
        if used + (n - i) < k {
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels.push(l);
            rec(i + 1, n, k, labels, used.max(l + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, blocks, &mut Vec::with_capacity(n), 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &SeparabilityStructure) -> Vec<String> {
        s.partitions().iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn partition_counts() {
        assert_eq!(all_set_partitions(3, 2).len(), 3);
        assert_eq!(all_set_partitions(4, 2).len(), 7);
        assert_eq!(all_set_partitions(4, 3).len(), 6);
        assert_eq!(all_set_partitions(4, 4).len(), 1);
    }

    #[test]
    fn size_constrained_cuts_on_four_parties() {
        let one = SeparabilityStructure::new(StructureKind::SizeConstrainedBisep(1), vec![2; 4]).unwrap();
        assert_eq!(labels(&one), vec!["123|4", "124|3", "134|2", "1|234"]);
        let two = SeparabilityStructure::new(StructureKind::SizeConstrainedBisep(2), vec![2; 4]).unwrap();
        assert_eq!(labels(&two), vec!["12|34", "13|24", "14|23"]);
        let tri = SeparabilityStructure::new(StructureKind::Triseparable(vec![]), vec![2; 4]).unwrap();
        assert_eq!(tri.partitions().len(), 6);
        assert!(tri.partitions().iter().all(|p| p.blocks().len() == 3));
    }

    #[test]
    fn output_widths() {
        let s = SeparabilityStructure::full_sep(vec![2, 2]).unwrap();
        assert_eq!(s.outputs_per_index(), 9);
        let b = SeparabilityStructure::biseparable(vec![2, 2, 2]).unwrap();
        assert_eq!(b.partitions().len(), 3);
        assert_eq!(b.outputs_per_index(), 39);
    }

    #[test]
    fn invalid_structures() {
        assert!(SeparabilityStructure::full_sep(vec![2]).is_err());
        assert!(SeparabilityStructure::new(StructureKind::FixedBipartition(vec![0, 1, 2]), vec![2; 3]).is_err());
        assert!(SeparabilityStructure::new(StructureKind::FixedBipartition(vec![5]), vec![2; 3]).is_err());
        assert!(SeparabilityStructure::parse("cut:1|1", vec![2, 2]).is_err());
        assert!(SeparabilityStructure::parse("cut:12|3|4", vec![2; 4]).is_err());
        assert!(SeparabilityStructure::new(StructureKind::SizeConstrainedBisep(0), vec![2; 4]).is_err());
        let overlapping = Partition::new(vec![vec![0, 1], vec![1, 2]]);
        assert!(overlapping.validate(3).is_err());
        let short = Partition::new(vec![vec![0], vec![1]]);
        assert!(short.validate(3).is_err());
        assert!(SeparabilityStructure::new(StructureKind::Biseparable(vec![short]), vec![2; 3]).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        for d in ["full", "cut:1|23", "bisep", "bisep-size:2", "trisep", "bisep:1|234,12|34"] {
            let dims = if d.contains("34") || d.contains("size") || d == "trisep" { vec![2; 4] } else { vec![2; 3] };
            let s = SeparabilityStructure::parse(d, dims.clone()).unwrap();
            assert_eq!(s.descriptor(), d);
            assert_eq!(SeparabilityStructure::parse(&s.descriptor(), dims).unwrap(), s);
        }
        assert!(SeparabilityStructure::parse("nonsense", vec![2, 2]).is_err());
        assert!(SeparabilityStructure::parse("cut:1|2x", vec![2, 2]).is_err());
    }

    /// Explicit permutation for (13|24): block-order |a c>|b d> maps to party order |a b c d>.
    fn brute_force_13_24() -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(16, 16);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let block_index = ((a * 2 + c) * 2 + b) * 2 + d;
                        let canonical = ((a * 2 + b) * 2 + c) * 2 + d;
                        p[(canonical, block_index)] = Complex64::new(1.0, 0.0);
                    }
                }
            }
        }
        p
    }

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        use rand::Rng;
        let mut rng = crate::states::rng_from_seed(seed);
        ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen(), rng.gen()))
    }

    #[test]
    fn reorder_against_permutation_matrix() {
        let dims = [2, 2, 2, 2];
        let p = Partition::new(vec![vec![0, 2], vec![1, 3]]);
        let m = random_matrix(16, 1);
        let reordered = reorder_to_canonical(&p, &dims, &m).unwrap();
        let perm = brute_force_13_24();
        let expected = perm.matmul(&m).matmul(&perm.adjoint());
        assert!(reordered.max_abs_diff(&expected) < 1e-15);

        // Inverse permutation undoes it.
        let fwd = p.block_order_permutation(&dims);
        let mut inv = vec![0; 16];
        for (i, &c) in fwd.iter().enumerate() {
            inv[c] = i;
        }
        let back = ComplexMatrix::from_fn(16, 16, |i, j| reordered[(fwd[i], fwd[j])]);
        assert_eq!(back, m);
        assert!(inv.iter().enumerate().all(|(c, &i)| fwd[i] == c));

        let trivial = Partition::new(vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(reorder_to_canonical(&trivial, &dims, &m).unwrap(), m);
        assert!(reorder_to_canonical(&Partition::new(vec![vec![0], vec![1]]), &dims, &m).is_err());
    }

    #[test]
    fn product_vector_matches_reordered_kron() {
        let dims = [2, 3, 2];
        let p = Partition::new(vec![vec![0, 2], vec![1]]);
        let s1: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64 + 1.0, 0.5)).collect();
        let s2: Vec<Complex64> = (0..3).map(|i| Complex64::new(0.2, i as f64)).collect();
        let v = p.product_vector(&dims, &[s1.clone(), s2.clone()]).unwrap();
        let kron = ComplexMatrix::outer(&s1).kron(&ComplexMatrix::outer(&s2)).unwrap();
        let expected = reorder_to_canonical(&p, &dims, &kron).unwrap();
        assert!(ComplexMatrix::outer(&v).max_abs_diff(&expected) < 1e-12);
        assert!(p.product_vector(&dims, &[s1]).is_err());
    }
}
