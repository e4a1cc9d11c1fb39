//! Canonical-form elements of the concrete countable groups: ℤᵏ, ℤ_m, the
//! free group F_k and the lamplighter groups ℤᵏ ≀ ℤ₂.
//!
//! Elements are immutable values. Every constructor canonicalizes, so
//! structural equality is group equality, and the derived total order gives
//! deterministic iteration over measure supports.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::ops::Mul;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("elements belong to different groups: {left} and {right}")]
    Mismatch { left: GroupSpec, right: GroupSpec },
    #[error("invalid group parameters: {0}")]
    InvalidSpec(String),
    #[error("invalid element: {0}")]
    InvalidElement(String),
}

/// Element literal that failed to parse. `column` is a 1-based character
/// offset into the literal.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message} in element literal `{literal}`")]
pub struct ParseElementError {
    pub literal: String,
    pub column: usize,
    pub message: String,
}

/// Identifies one concrete group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupSpec {
    /// ℤᵏ
    Integers { rank: usize },
    /// ℤ_m
    Cyclic { modulus: u64 },
    /// Free group on `rank` generators.
    Free { rank: usize },
    /// ℤᵏ ⋉ ⊕_{ℤᵏ} ℤ₂
    Lamplighter { rank: usize },
}

impl GroupSpec {
    pub fn integers(rank: usize) -> Result<Self, GroupError> {
        GroupSpec::Integers { rank }.validated()
    }

    pub fn cyclic(modulus: u64) -> Result<Self, GroupError> {
        GroupSpec::Cyclic { modulus }.validated()
    }

    pub fn free(rank: usize) -> Result<Self, GroupError> {
        GroupSpec::Free { rank }.validated()
    }

    pub fn lamplighter(rank: usize) -> Result<Self, GroupError> {
        GroupSpec::Lamplighter { rank }.validated()
    }

    pub fn validated(self) -> Result<Self, GroupError> {
        let ok = match self {
            GroupSpec::Integers { rank } | GroupSpec::Lamplighter { rank } => rank >= 1,
            GroupSpec::Cyclic { modulus } => modulus >= 1,
            // generator names are single letters
            GroupSpec::Free { rank } => (1..=26).contains(&rank),
        };
        if ok {
            Ok(self)
        } else {
            Err(GroupError::InvalidSpec(format!("{self}")))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GroupSpec::Integers { .. } => "integers",
            GroupSpec::Cyclic { .. } => "cyclic",
            GroupSpec::Free { .. } => "free",
            GroupSpec::Lamplighter { .. } => "lamplighter",
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(*self)
    }

    /// The standard symmetric generating set, in canonical order.
    pub fn generators(&self) -> Vec<GroupElement> {
        let mut gens = BTreeSet::new();
        match *self {
            GroupSpec::Integers { rank } => {
                for i in 0..rank {
                    for s in [-1, 1] {
                        let mut v = vec![0; rank];
                        v[i] = s;
                        gens.insert(GroupElement(Repr::IntVector(v)));
                    }
                }
            }
            GroupSpec::Cyclic { modulus } => {
                if modulus > 1 {
                    gens.insert(GroupElement::cyclic(1, modulus));
                    gens.insert(GroupElement::cyclic(modulus as i64 - 1, modulus));
                }
            }
            GroupSpec::Free { rank } => {
                for i in 1..=rank as i32 {
                    gens.insert(GroupElement(Repr::Word { rank, letters: vec![i] }));
                    gens.insert(GroupElement(Repr::Word { rank, letters: vec![-i] }));
                }
            }
            GroupSpec::Lamplighter { rank } => {
                for i in 0..rank {
                    for s in [-1, 1] {
                        let mut v = vec![0; rank];
                        v[i] = s;
                        gens.insert(GroupElement(Repr::Lamp { position: v, lamps: Vec::new() }));
                    }
                }
                gens.insert(GroupElement(Repr::Lamp {
                    position: vec![0; rank],
                    lamps: vec![vec![0; rank]],
                }));
            }
        }
        gens.into_iter().collect()
    }

    /// Ball of the given radius in the word metric of [`GroupSpec::generators`].
    pub fn ball(&self, radius: usize) -> Vec<GroupElement> {
        let gens = self.generators();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.identity());
        queue.push_back((self.identity(), 0usize));
        while let Some((g, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for s in &gens {
                let next = &g * s;
                if seen.insert(next.clone()) {
                    queue.push_back((next, d + 1));
                }
            }
        }
        seen.into_iter().collect()
    }

    pub fn parse_element(&self, literal: &str) -> Result<GroupElement, ParseElementError> {
        parse::element(*self, literal)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Integers { rank } => write!(f, "Z^{rank}"),
            GroupSpec::Cyclic { modulus } => write!(f, "Z_{modulus}"),
            GroupSpec::Free { rank } => write!(f, "F_{rank}"),
            GroupSpec::Lamplighter { rank } => write!(f, "Z^{rank} wr Z_2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Repr {
    IntVector(Vec<i64>),
    Cyclic { modulus: u64, residue: u64 },
    /// Generator `i` (1-based) is `i`, its inverse is `-i`.
    Word { rank: usize, letters: Vec<i32> },
    /// Lit sites only, sorted and distinct.
    Lamp { position: Vec<i64>, lamps: Vec<Vec<i64>> },
}

/// An element of one of the groups named by [`GroupSpec`], in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(Repr);

impl GroupElement {
    pub fn identity(spec: GroupSpec) -> Self {
        GroupElement(match spec {
            GroupSpec::Integers { rank } => Repr::IntVector(vec![0; rank]),
            GroupSpec::Cyclic { modulus } => Repr::Cyclic { modulus, residue: 0 },
            GroupSpec::Free { rank } => Repr::Word { rank, letters: Vec::new() },
            GroupSpec::Lamplighter { rank } => Repr::Lamp { position: vec![0; rank], lamps: Vec::new() },
        })
    }

    pub fn int_vector(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "ℤᵏ needs k ≥ 1");
        GroupElement(Repr::IntVector(coords))
    }

    /// Shorthand for an element of ℤ.
    pub fn int(n: i64) -> Self {
        GroupElement(Repr::IntVector(vec![n]))
    }

    pub fn cyclic(residue: i64, modulus: u64) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        let residue = residue.rem_euclid(modulus as i64) as u64;
        GroupElement(Repr::Cyclic { modulus, residue })
    }

    /// A free-group word from signed 1-based generator indices; reduced on
    /// construction.
    pub fn word(rank: usize, letters: &[i32]) -> Result<Self, GroupError> {
        if let Some(bad) = letters.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > rank) {
            return Err(GroupError::InvalidElement(format!("letter {bad} outside F_{rank}")));
        }
        Ok(GroupElement(Repr::Word { rank, letters: reduce(letters.iter().copied()) }))
    }

    /// Lamplighter element. Sites listed an even number of times cancel.
    pub fn lamp(position: Vec<i64>, lamps: Vec<Vec<i64>>) -> Result<Self, GroupError> {
        let rank = position.len();
        if rank == 0 || lamps.iter().any(|s| s.len() != rank) {
            return Err(GroupError::InvalidElement("lamp site dimension mismatch".into()));
        }
        let mut lit = BTreeSet::new();
        for site in lamps {
            if !lit.remove(&site) {
                lit.insert(site);
            }
        }
        Ok(GroupElement(Repr::Lamp { position, lamps: lit.into_iter().collect() }))
    }

    pub fn spec(&self) -> GroupSpec {
        match &self.0 {
            Repr::IntVector(v) => GroupSpec::Integers { rank: v.len() },
            Repr::Cyclic { modulus, .. } => GroupSpec::Cyclic { modulus: *modulus },
            Repr::Word { rank, .. } => GroupSpec::Free { rank: *rank },
            Repr::Lamp { position, .. } => GroupSpec::Lamplighter { rank: position.len() },
        }
    }

    pub fn belongs_to(&self, spec: GroupSpec) -> bool {
        self.spec() == spec
    }

    pub fn is_identity(&self) -> bool {
        *self == GroupElement::identity(self.spec())
    }

    /// Coordinates of an ℤᵏ element.
    pub fn coords(&self) -> Option<&[i64]> {
        match &self.0 {
            Repr::IntVector(v) => Some(v),
            _ => None,
        }
    }

    pub fn residue(&self) -> Option<u64> {
        match &self.0 {
            Repr::Cyclic { residue, .. } => Some(*residue),
            _ => None,
        }
    }

    /// Reduced letters of a free-group element.
    pub fn letters(&self) -> Option<&[i32]> {
        match &self.0 {
            Repr::Word { letters, .. } => Some(letters),
            _ => None,
        }
    }

    pub fn lamp_position(&self) -> Option<&[i64]> {
        match &self.0 {
            Repr::Lamp { position, .. } => Some(position),
            _ => None,
        }
    }

    pub fn lit_sites(&self) -> Option<&[Vec<i64>]> {
        match &self.0 {
            Repr::Lamp { lamps, .. } => Some(lamps),
            _ => None,
        }
    }

    pub fn try_mul(&self, other: &GroupElement) -> Result<GroupElement, GroupError> {
        let repr = match (&self.0, &other.0) {
            (Repr::IntVector(a), Repr::IntVector(b)) if a.len() == b.len() => {
                Repr::IntVector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Repr::Cyclic { modulus: m, residue: a }, Repr::Cyclic { modulus: n, residue: b }) if m == n => {
                Repr::Cyclic { modulus: *m, residue: ((*a as u128 + *b as u128) % *m as u128) as u64 }
            }
            (Repr::Word { rank: r, letters: a }, Repr::Word { rank: s, letters: b }) if r == s => Repr::Word {
                rank: *r,
                letters: reduce(a.iter().chain(b).copied()),
            },
            (Repr::Lamp { position: s, lamps: f }, Repr::Lamp { position: t, lamps: g }) if s.len() == t.len() => {
                // (s, f)(t, g) = (s + t, f + g shifted by s)
                let shifted: BTreeSet<Vec<i64>> =
                    g.iter().map(|site| site.iter().zip(s).map(|(x, d)| x + d).collect()).collect();
                let own: BTreeSet<Vec<i64>> = f.iter().cloned().collect();
                Repr::Lamp {
                    position: s.iter().zip(t).map(|(x, y)| x + y).collect(),
                    lamps: own.symmetric_difference(&shifted).cloned().collect(),
                }
            }
            _ => return Err(GroupError::Mismatch { left: self.spec(), right: other.spec() }),
        };
        Ok(GroupElement(repr))
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement(match &self.0 {
            Repr::IntVector(v) => Repr::IntVector(v.iter().map(|x| -x).collect()),
            Repr::Cyclic { modulus, residue } => Repr::Cyclic {
                modulus: *modulus,
                residue: (*modulus - residue) % modulus,
            },
            Repr::Word { rank, letters } => Repr::Word {
                rank: *rank,
                letters: letters.iter().rev().map(|l| -l).collect(),
            },
            Repr::Lamp { position, lamps } => {
                // (s, f)⁻¹ = (−s, f shifted by −s)
                let mut shifted: Vec<Vec<i64>> =
                    lamps.iter().map(|site| site.iter().zip(position).map(|(x, d)| x - d).collect()).collect();
                shifted.sort();
                Repr::Lamp { position: position.iter().map(|x| -x).collect(), lamps: shifted }
            }
        })
    }

    /// Word length with respect to [`GroupSpec::generators`], for the
    /// groups where it has a closed form (ℤᵏ, ℤ_m, F_k).
    pub fn word_length(&self) -> Option<usize> {
        match &self.0 {
            Repr::IntVector(v) => Some(v.iter().map(|x| x.unsigned_abs() as usize).sum()),
            Repr::Cyclic { modulus, residue } => Some((*residue).min(modulus - residue) as usize),
            Repr::Word { letters, .. } => Some(letters.len()),
            Repr::Lamp { .. } => None,
        }
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;

    /// Panics when the operands live in different groups; use
    /// [`GroupElement::try_mul`] for unvalidated input.
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        match self.try_mul(rhs) {
            Ok(g) => g,
            Err(e) => panic!("{e}"),
        }
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: GroupElement) -> GroupElement {
        &self * &rhs
    }
}

/// Free reduction with a stack; never leaves an adjacent `x x⁻¹` pair.
fn reduce(letters: impl IntoIterator<Item = i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::new();
    for l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn join(coords: &[i64]) -> String {
    coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::IntVector(v) => f.write_str(&join(v)),
            Repr::Cyclic { residue, .. } => write!(f, "{residue}"),
            Repr::Word { letters, .. } => {
                if letters.is_empty() {
                    return f.write_str("e");
                }
                for &l in letters {
                    let c = (b'a' + (l.unsigned_abs() - 1) as u8) as char;
                    if l > 0 {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, "{c}^-1")?;
                    }
                }
                Ok(())
            }
            Repr::Lamp { position, lamps } => {
                let flat: Vec<i64> = lamps.iter().flatten().copied().collect();
                write!(f, "p={};L={}", join(position), join(&flat))
            }
        }
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.spec(), self)
    }
}

mod parse {
    use super::*;

    fn err(literal: &str, column: usize, message: impl Into<String>) -> ParseElementError {
        ParseElementError { literal: literal.to_string(), column, message: message.into() }
    }

    /// Parses a comma-separated list of integers starting at character
    /// offset `base` of `literal`.
    fn int_list(literal: &str, body: &str, base: usize) -> Result<Vec<i64>, ParseElementError> {
        if body.trim().is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut offset = base;
        for part in body.split(',') {
            let t = part.trim();
            let lead = part.chars().take_while(|c| c.is_whitespace()).count();
            let v = t
                .parse::<i64>()
                .map_err(|_| err(literal, offset + lead + 1, format!("expected an integer, found `{t}`")))?;
            out.push(v);
            offset += part.chars().count() + 1;
        }
        Ok(out)
    }

    pub(super) fn element(spec: GroupSpec, literal: &str) -> Result<GroupElement, ParseElementError> {
        match spec {
            GroupSpec::Integers { rank } => {
                let v = int_list(literal, literal, 0)?;
                if v.len() != rank {
                    return Err(err(literal, 1, format!("expected {rank} coordinates, found {}", v.len())));
                }
                Ok(GroupElement(Repr::IntVector(v)))
            }
            GroupSpec::Cyclic { modulus } => {
                let v = int_list(literal, literal, 0)?;
                if v.len() != 1 {
                    return Err(err(literal, 1, "expected a single residue"));
                }
                Ok(GroupElement::cyclic(v[0], modulus))
            }
            GroupSpec::Free { rank } => word(literal, rank),
            GroupSpec::Lamplighter { rank } => lamp(literal, rank),
        }
    }

    fn word(literal: &str, rank: usize) -> Result<GroupElement, ParseElementError> {
        let chars: Vec<char> = literal.chars().collect();
        let trimmed = literal.trim();
        if trimmed.is_empty() || trimmed == "e" {
            return Ok(GroupElement::identity(GroupSpec::Free { rank }));
        }
        let mut letters = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if !c.is_ascii_lowercase() || (c as u8 - b'a') as usize >= rank {
                return Err(err(literal, i + 1, format!("`{c}` is not a generator of F_{rank}")));
            }
            let g = (c as u8 - b'a') as i32 + 1;
            i += 1;
            let mut power: i64 = 1;
            if i < chars.len() && chars[i] == '^' {
                let start = i + 1;
                let mut j = start;
                if j < chars.len() && chars[j] == '-' {
                    j += 1;
                }
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[start..j].iter().collect();
                power = text
                    .parse()
                    .map_err(|_| err(literal, start + 1, "expected an integer exponent after `^`"))?;
                i = j;
            }
            let l = if power < 0 { -g } else { g };
            for _ in 0..power.unsigned_abs() {
                letters.push(l);
            }
        }
        Ok(GroupElement(Repr::Word { rank, letters: reduce(letters) }))
    }

    fn lamp(literal: &str, rank: usize) -> Result<GroupElement, ParseElementError> {
        let mut position = None;
        let mut sites = Vec::new();
        let mut offset = 0;
        for field in literal.split(';') {
            let lead = field.chars().take_while(|c| c.is_whitespace()).count();
            let t = field.trim();
            let body_base = offset + lead + 2;
            if let Some(body) = t.strip_prefix("p=") {
                let v = int_list(literal, body, body_base)?;
                if v.len() != rank {
                    return Err(err(literal, body_base + 1, format!("position needs {rank} coordinates")));
                }
                position = Some(v);
            } else if let Some(body) = t.strip_prefix("L=") {
                let flat = int_list(literal, body, body_base)?;
                if flat.len() % rank != 0 {
                    return Err(err(literal, body_base + 1, format!("lamp sites need {rank} coordinates each")));
                }
                sites = flat.chunks(rank).map(|c| c.to_vec()).collect();
            } else {
                return Err(err(literal, offset + lead + 1, "expected `p=...` or `L=...`"));
            }
            offset += field.chars().count() + 1;
        }
        let position = position.ok_or_else(|| err(literal, 1, "missing position `p=...`"))?;
        GroupElement::lamp(position, sites).map_err(|e| err(literal, 1, e.to_string()))
    }
}
