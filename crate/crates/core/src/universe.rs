//! The shared hierarchical universe: a perfect B-ary tree with D named levels.
//!
//! Every claim either side can make is a node or path fragment of this tree.
//! Levels are 1-based throughout the crate: level 1 holds the roots, level D
//! the leaves.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lexicon;

/// Index into [`Universe::nodes`]. Stable for the lifetime of one universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone)]
struct Entity {
    name: String,
    /// 1-based level.
    level: usize,
    parent: Option<EntityId>,
    children: Vec<EntityId>,
}

/// Errors from universe construction and name resolution.
#[derive(Debug, thiserror::Error)]
pub enum UniverseError {
    #[error("unknown theme `{0}`")]
    UnknownTheme(String),
    #[error("branching must be >= 2 and depth >= 2 (got B={branching}, D={depth})")]
    BadShape { branching: usize, depth: usize },
    #[error("lexicon `{theme}` too small at level {level}: need {needed} names, have {available}")]
    LexiconCapacity {
        theme: String,
        level: usize,
        needed: usize,
        available: usize,
    },
    #[error("unknown entity name `{0}`")]
    UnknownEntity(String),
    #[error("entity `{name}` is at level {actual}, expected level {expected}")]
    WrongLevel {
        name: String,
        actual: usize,
        expected: usize,
    },
    #[error("path has {got} slots, universe depth is {depth}")]
    BadArity { got: usize, depth: usize },
    #[error("slot at level {level} breaks the parent chain")]
    BrokenChain { level: usize },
    #[error("malformed universe data: {0}")]
    Malformed(String),
}

/// A full root-to-leaf assignment, one entity per level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    values: Vec<EntityId>,
}

impl Path {
    pub fn values(&self) -> &[EntityId] {
        &self.values
    }

    /// Entity at 1-based `level`.
    pub fn at(&self, level: usize) -> EntityId {
        self.values[level - 1]
    }

    pub fn depth(&self) -> usize {
        self.values.len()
    }
}

/// A path with holes: `None` marks a level the holder knows nothing about.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialPath {
    slots: Vec<Option<EntityId>>,
}

impl PartialPath {
    /// All-null partial path of the given depth.
    pub fn empty(depth: usize) -> Self {
        PartialPath {
            slots: vec![None; depth],
        }
    }

    pub fn slots(&self) -> &[Option<EntityId>] {
        &self.slots
    }

    /// Slot at 1-based `level`.
    pub fn at(&self, level: usize) -> Option<EntityId> {
        self.slots[level - 1]
    }

    pub fn set(&mut self, level: usize, value: Option<EntityId>) {
        self.slots[level - 1] = value;
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(|s| s.is_some())
    }

    pub fn known_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Coarsest level whose slot is null, if any.
    pub fn coarsest_null(&self) -> Option<usize> {
        self.slots.iter().position(|s| s.is_none()).map(|i| i + 1)
    }

    /// True when the known slots are exactly levels `1..=j` for some `j`.
    pub fn is_prefix(&self) -> bool {
        let first_null = match self.slots.iter().position(|s| s.is_none()) {
            Some(i) => i,
            None => return true,
        };
        self.slots[first_null..].iter().all(|s| s.is_none())
    }
}

/// How a claimed `(level, entity)` relates to a belief state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Claim fits the universe and does not clash with any held belief.
    Consistent,
    /// The belief at that level is set and names a different entity.
    ContradictsBelief,
    /// Unknown entity, wrong level, or structurally incompatible with the
    /// believed chain (no single path can contain both).
    ViolatesUniverse,
}

/// One broken invariant found by [`validate_universe`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    /// Short rule id: `branching`, `uniqueness`, `level-count`, `linkage`.
    pub rule: String,
    /// Entity the rule broke at, when attributable.
    pub entity: Option<String>,
    pub detail: String,
}

/// Outcome of a structural universe check. Violations are data, not errors.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &str, entity: Option<&str>, detail: String) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            entity: entity.map(|e| e.to_string()),
            detail,
        });
    }
}

/// The shared entity tree. Immutable once built; cheap to share across
/// rollout workers behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Universe {
    level_names: Vec<String>,
    nodes: Vec<Entity>,
    roots: Vec<EntityId>,
    by_name: HashMap<String, EntityId>,
    branching: usize,
}

impl Universe {
    /// Depth D: number of levels.
    pub fn depth(&self) -> usize {
        self.level_names.len()
    }

    /// Branching factor B the universe was declared with.
    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn level_names(&self) -> &[String] {
        &self.level_names
    }

    /// Label of 1-based `level`.
    pub fn level_name(&self, level: usize) -> &str {
        &self.level_names[level - 1]
    }

    pub fn roots(&self) -> &[EntityId] {
        &self.roots
    }

    pub fn entity_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.nodes[id.0 as usize].name
    }

    pub fn level_of(&self, id: EntityId) -> usize {
        self.nodes[id.0 as usize].level
    }

    pub fn parent(&self, id: EntityId) -> Option<EntityId> {
        self.nodes[id.0 as usize].parent
    }

    pub fn children(&self, id: EntityId) -> &[EntityId] {
        &self.nodes[id.0 as usize].children
    }

    pub fn lookup(&self, name: &str) -> Option<EntityId> {
        self.by_name.get(name).copied()
    }

    /// Entities of 1-based `level`, in depth-first order.
    pub fn entities_at_level(&self, level: usize) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.walk(&mut |id| {
            if self.level_of(id) == level {
                out.push(id);
            }
        });
        out
    }

    /// Siblings of `id`: same parent (or fellow roots), excluding `id`.
    pub fn siblings(&self, id: EntityId) -> Vec<EntityId> {
        let pool: Vec<EntityId> = match self.parent(id) {
            Some(p) => self.children(p).to_vec(),
            None => self.roots.clone(),
        };
        pool.into_iter().filter(|&s| s != id).collect()
    }

    /// Ancestor of `id` at 1-based `level` (level must not exceed the
    /// entity's own level; `id` is its own ancestor at its level).
    pub fn ancestor_at(&self, id: EntityId, level: usize) -> Option<EntityId> {
        let mut cur = id;
        loop {
            let l = self.level_of(cur);
            if l == level {
                return Some(cur);
            }
            if l < level {
                return None;
            }
            cur = self.parent(cur)?;
        }
    }

    fn walk(&self, f: &mut impl FnMut(EntityId)) {
        fn rec(u: &Universe, id: EntityId, f: &mut impl FnMut(EntityId)) {
            f(id);
            for &c in u.children(id) {
                rec(u, c, f);
            }
        }
        for &r in &self.roots {
            rec(self, r, f);
        }
    }

    /// Every root-to-leaf path, in depth-first order.
    pub fn leaf_paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        fn rec(u: &Universe, id: EntityId, stack: &mut Vec<EntityId>, out: &mut Vec<Path>) {
            stack.push(id);
            if u.children(id).is_empty() {
                out.push(Path {
                    values: stack.clone(),
                });
            } else {
                for &c in u.children(id) {
                    rec(u, c, stack, out);
                }
            }
            stack.pop();
        }
        for &r in &self.roots {
            rec(self, r, &mut stack, &mut out);
        }
        out
    }

    /// Build a full path from per-level entity names.
    pub fn resolve_path(&self, names: &[String]) -> Result<Path, UniverseError> {
        if names.len() != self.depth() {
            return Err(UniverseError::BadArity {
                got: names.len(),
                depth: self.depth(),
            });
        }
        let mut values = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let id = self
                .lookup(name)
                .ok_or_else(|| UniverseError::UnknownEntity(name.clone()))?;
            let expected = i + 1;
            if self.level_of(id) != expected {
                return Err(UniverseError::WrongLevel {
                    name: name.clone(),
                    actual: self.level_of(id),
                    expected,
                });
            }
            if i > 0 && self.parent(id) != Some(values[i - 1]) {
                return Err(UniverseError::BrokenChain { level: expected });
            }
            values.push(id);
        }
        Ok(Path { values })
    }

    /// Build a partial path from per-level optional names, checking name
    /// resolution and level placement only. Belief states may hold broken
    /// chains (an attacker can believe incompatible things); prior masks may
    /// not — use [`Universe::resolve_partial`] for those.
    pub fn resolve_slots(&self, names: &[Option<String>]) -> Result<PartialPath, UniverseError> {
        if names.len() != self.depth() {
            return Err(UniverseError::BadArity {
                got: names.len(),
                depth: self.depth(),
            });
        }
        let mut slots: Vec<Option<EntityId>> = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            match name {
                None => slots.push(None),
                Some(n) => {
                    let id = self
                        .lookup(n)
                        .ok_or_else(|| UniverseError::UnknownEntity(n.clone()))?;
                    let expected = i + 1;
                    if self.level_of(id) != expected {
                        return Err(UniverseError::WrongLevel {
                            name: n.clone(),
                            actual: self.level_of(id),
                            expected,
                        });
                    }
                    slots.push(Some(id));
                }
            }
        }
        Ok(PartialPath { slots })
    }

    /// Build a partial path from per-level optional names, checking level
    /// placement and chain consistency between the non-null slots.
    pub fn resolve_partial(&self, names: &[Option<String>]) -> Result<PartialPath, UniverseError> {
        let pp = self.resolve_slots(names)?;
        if !self.partial_is_chain(&pp) {
            return Err(UniverseError::BrokenChain {
                level: pp
                    .slots
                    .iter()
                    .position(|s| s.is_some())
                    .map(|i| i + 1)
                    .unwrap_or(1),
            });
        }
        Ok(pp)
    }

    /// True when every pair of non-null slots lies on one root-to-leaf path.
    pub fn partial_is_chain(&self, pp: &PartialPath) -> bool {
        let known: Vec<(usize, EntityId)> = pp
            .slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|id| (i + 1, id)))
            .collect();
        for w in known.windows(2) {
            let (coarse_level, coarse) = w[0];
            let (_, fine) = w[1];
            if self.ancestor_at(fine, coarse_level) != Some(coarse) {
                return false;
            }
        }
        true
    }

    /// Per-level names of a full path.
    pub fn path_names(&self, path: &Path) -> Vec<String> {
        path.values.iter().map(|&id| self.name(id).to_string()).collect()
    }

    /// Per-level optional names of a partial path.
    pub fn partial_names(&self, pp: &PartialPath) -> Vec<Option<String>> {
        pp.slots
            .iter()
            .map(|s| s.map(|id| self.name(id).to_string()))
            .collect()
    }

    /// Serialize as the nested name map used in scenario files:
    /// `{root: {child: [leaf, ...]}}`.
    pub fn to_nested(&self) -> serde_json::Value {
        fn rec(u: &Universe, id: EntityId) -> serde_json::Value {
            if u.children(id).iter().all(|&c| u.children(c).is_empty()) {
                serde_json::Value::Array(
                    u.children(id)
                        .iter()
                        .map(|&c| serde_json::Value::String(u.name(c).to_string()))
                        .collect(),
                )
            } else {
                let mut map = serde_json::Map::new();
                for &c in u.children(id) {
                    map.insert(u.name(c).to_string(), rec(u, c));
                }
                serde_json::Value::Object(map)
            }
        }
        let mut map = serde_json::Map::new();
        for &r in &self.roots {
            if self.children(r).is_empty() {
                // depth 1 degenerate form: plain list of roots
                return serde_json::Value::Array(
                    self.roots
                        .iter()
                        .map(|&r| serde_json::Value::String(self.name(r).to_string()))
                        .collect(),
                );
            }
            map.insert(self.name(r).to_string(), rec(self, r));
        }
        serde_json::Value::Object(map)
    }

    /// Rebuild a universe from the nested name map plus level labels and the
    /// declared branching factor. Shape problems are left for
    /// [`validate_universe`] to report; only arity mismatches between the map
    /// depth and `level_names` are hard errors.
    pub fn from_nested(
        level_names: &[String],
        nested: &serde_json::Value,
        branching: usize,
    ) -> Result<Universe, UniverseError> {
        let mut u = Universe {
            level_names: level_names.to_vec(),
            nodes: Vec::new(),
            roots: Vec::new(),
            by_name: HashMap::new(),
            branching,
        };
        let depth = level_names.len();

        fn add_node(u: &mut Universe, name: &str, level: usize, parent: Option<EntityId>) -> EntityId {
            let id = EntityId(u.nodes.len() as u32);
            u.nodes.push(Entity {
                name: name.to_string(),
                level,
                parent,
                children: Vec::new(),
            });
            // first occurrence wins; duplicates surface through validation
            u.by_name.entry(name.to_string()).or_insert(id);
            if let Some(p) = parent {
                u.nodes[p.0 as usize].children.push(id);
            } else {
                u.roots.push(id);
            }
            id
        }

        fn rec(
            u: &mut Universe,
            value: &serde_json::Value,
            level: usize,
            depth: usize,
            parent: Option<EntityId>,
        ) -> Result<(), UniverseError> {
            match value {
                serde_json::Value::Object(map) => {
                    if level > depth {
                        return Err(UniverseError::Malformed(format!(
                            "nesting deeper than {depth} levels"
                        )));
                    }
                    for (name, sub) in map {
                        let id = add_node(u, name, level, parent);
                        rec(u, sub, level + 1, depth, Some(id))?;
                    }
                    Ok(())
                }
                serde_json::Value::Array(items) => {
                    if level != depth {
                        return Err(UniverseError::Malformed(format!(
                            "leaf list at level {level}, expected at level {depth}"
                        )));
                    }
                    for item in items {
                        let name = item.as_str().ok_or_else(|| {
                            UniverseError::Malformed("leaf entry is not a string".into())
                        })?;
                        add_node(u, name, level, parent);
                    }
                    Ok(())
                }
                _ => Err(UniverseError::Malformed(
                    "expected object or array of names".into(),
                )),
            }
        }

        rec(&mut u, nested, 1, depth, None)?;
        Ok(u)
    }
}

impl fmt::Display for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn rec(u: &Universe, id: EntityId, indent: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            writeln!(f, "{}{}", "  ".repeat(indent), u.name(id))?;
            for &c in u.children(id) {
                rec(u, c, indent + 1, f)?;
            }
            Ok(())
        }
        writeln!(f, "levels: {}", self.level_names.join(" > "))?;
        for &r in &self.roots {
            rec(self, r, 0, f)?;
        }
        Ok(())
    }
}

/// Generate a perfect B-ary universe with names drawn without replacement
/// from the theme lexicon. Deterministic for fixed inputs.
pub fn generate_universe(
    seed: u64,
    branching: usize,
    depth: usize,
    theme: &str,
) -> Result<Universe, UniverseError> {
    if branching < 2 || depth < 2 {
        return Err(UniverseError::BadShape { branching, depth });
    }
    let lex = lexicon::by_name(theme).ok_or_else(|| UniverseError::UnknownTheme(theme.to_string()))?;
    if depth > lex.max_depth() {
        return Err(UniverseError::LexiconCapacity {
            theme: theme.to_string(),
            level: depth,
            needed: branching.pow(depth as u32),
            available: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names_per_level: Vec<Vec<&str>> = Vec::with_capacity(depth);
    for level in 1..=depth {
        let needed = branching.pow(level as u32);
        let pool = lex.pools[level - 1];
        if pool.len() < needed {
            return Err(UniverseError::LexiconCapacity {
                theme: theme.to_string(),
                level,
                needed,
                available: pool.len(),
            });
        }
        let picks = sample(&mut rng, pool.len(), needed);
        names_per_level.push(picks.iter().map(|i| pool[i]).collect());
    }

    let mut u = Universe {
        level_names: lex.level_names[..depth].iter().map(|s| s.to_string()).collect(),
        nodes: Vec::new(),
        roots: Vec::new(),
        by_name: HashMap::new(),
        branching,
    };
    let mut cursors = vec![0usize; depth];
    fn build(
        u: &mut Universe,
        names: &[Vec<&str>],
        cursors: &mut [usize],
        level: usize,
        depth: usize,
        branching: usize,
        parent: Option<EntityId>,
    ) {
        for _ in 0..branching {
            let name = names[level - 1][cursors[level - 1]];
            cursors[level - 1] += 1;
            let id = EntityId(u.nodes.len() as u32);
            u.nodes.push(Entity {
                name: name.to_string(),
                level,
                parent,
                children: Vec::new(),
            });
            u.by_name.insert(name.to_string(), id);
            match parent {
                Some(p) => u.nodes[p.0 as usize].children.push(id),
                None => u.roots.push(id),
            }
            if level < depth {
                build(u, names, cursors, level + 1, depth, branching, Some(id));
            }
        }
    }
    build(&mut u, &names_per_level, &mut cursors, 1, depth, branching, None);
    Ok(u)
}

/// Exact structural check of every universe invariant: perfect B-ary shape,
/// per-level entity counts, unique names, intact parent links.
pub fn validate_universe(u: &Universe) -> ValidationReport {
    let mut report = ValidationReport::default();
    let b = u.branching();
    let d = u.depth();

    if u.roots.len() != b {
        report.push(
            "branching",
            None,
            format!("expected {b} roots, found {}", u.roots.len()),
        );
    }

    let mut level_counts = vec![0usize; d + 1];
    let mut seen_names: HashMap<&str, usize> = HashMap::new();
    let mut reachable = 0usize;
    u.walk(&mut |id| {
        reachable += 1;
        let level = u.level_of(id);
        if level >= 1 && level <= d {
            level_counts[level] += 1;
        } else {
            report.push(
                "level-count",
                Some(u.name(id)),
                format!("entity sits at level {level}, outside 1..={d}"),
            );
        }
        *seen_names.entry(u.name(id)).or_insert(0) += 1;
        if level < d && u.children(id).len() != b {
            report.push(
                "branching",
                Some(u.name(id)),
                format!("non-leaf has {} children, expected {b}", u.children(id).len()),
            );
        }
        if level == d && !u.children(id).is_empty() {
            report.push(
                "branching",
                Some(u.name(id)),
                format!("leaf-level entity has {} children", u.children(id).len()),
            );
        }
        for &c in u.children(id) {
            if u.parent(c) != Some(id) {
                report.push(
                    "linkage",
                    Some(u.name(c)),
                    "child does not point back to its parent".to_string(),
                );
            }
            if u.level_of(c) != level + 1 {
                report.push(
                    "level-count",
                    Some(u.name(c)),
                    format!("child level {} under parent level {level}", u.level_of(c)),
                );
            }
        }
    });

    for level in 1..=d {
        let expected = b.pow(level as u32);
        if level_counts[level] != expected {
            report.push(
                "level-count",
                None,
                format!(
                    "level {level} has {} entities, expected {expected}",
                    level_counts[level]
                ),
            );
        }
    }

    if reachable != u.nodes.len() {
        report.push(
            "linkage",
            None,
            format!("{} entities stored, {reachable} reachable from roots", u.nodes.len()),
        );
    }

    let mut dupes: Vec<&str> = seen_names
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(&name, _)| name)
        .collect();
    dupes.sort_unstable();
    for name in dupes {
        report.push("uniqueness", Some(name), "entity name appears more than once".to_string());
    }

    report
}

/// All leaf paths a fully consistent deceiver may commit to: they match the
/// prior at every known slot and are wrong at every unknown slot. Depth-first
/// universe order.
pub fn decoy_paths(u: &Universe, gt: &Path, prior: &PartialPath) -> Vec<Path> {
    u.leaf_paths()
        .into_iter()
        .filter(|p| {
            (1..=u.depth()).all(|level| match prior.at(level) {
                Some(known) => p.at(level) == known,
                None => p.at(level) != gt.at(level),
            })
        })
        .collect()
}

/// Judge a claimed `(level, entity name)` against a belief state.
///
/// Precedence: universe-structural problems first (unknown entity, wrong
/// level, chain incompatible with beliefs held at other levels), then a
/// direct mismatch with the belief at the claimed level, else consistent.
pub fn check_claim_consistency(
    u: &Universe,
    belief: &PartialPath,
    claim_level: usize,
    claim_entity: &str,
) -> Verdict {
    let id = match u.lookup(claim_entity) {
        Some(id) => id,
        None => return Verdict::ViolatesUniverse,
    };
    if claim_level < 1 || claim_level > u.depth() || u.level_of(id) != claim_level {
        return Verdict::ViolatesUniverse;
    }
    for (i, slot) in belief.slots().iter().enumerate() {
        let level = i + 1;
        let held = match slot {
            Some(h) => *h,
            None => continue,
        };
        if level == claim_level {
            continue;
        }
        let compatible = if level < claim_level {
            u.ancestor_at(id, level) == Some(held)
        } else {
            u.ancestor_at(held, claim_level) == Some(id)
        };
        if !compatible {
            return Verdict::ViolatesUniverse;
        }
    }
    match belief.at(claim_level) {
        Some(held) if held != id => Verdict::ContradictsBelief,
        _ => Verdict::Consistent,
    }
}
