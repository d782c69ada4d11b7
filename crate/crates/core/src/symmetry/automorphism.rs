//! Automorphisms of a vertex-coloured chemical graph.
//!
//! Colours start from (element, residue name, chain) and are refined by
//! neighbourhood hashing until stable. Automorphisms are then enumerated by
//! depth-first extension along a BFS order: each vertex after the first has
//! an already-mapped parent, so its image must be a same-coloured neighbour
//! of the parent's image. The identity is always produced first.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::topology::MolecularSystem;

pub const DEFAULT_AUTOMORPHISM_CAP: usize = 1024;

/// Automorphisms of one connected component. Each entry maps the component's
/// atoms (in `atoms` order) to their image atoms: `maps[k][p]` is the image
/// of `atoms[p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphisms {
    pub atoms: Vec<usize>,
    pub maps: Vec<Vec<usize>>,
    /// Set when enumeration stopped at the cap.
    pub truncated: bool,
}

fn refined_colors(system: &MolecularSystem, atoms: &[usize]) -> HashMap<usize, usize> {
    let mut ids: BTreeMap<(String, String, usize), usize> = BTreeMap::new();
    let mut color: HashMap<usize, usize> = HashMap::new();
    for &a in atoms {
        let at = system.atom(a);
        let key = (at.element.clone(), at.residue_name.clone(), at.chain_index);
        let next = ids.len();
        color.insert(a, *ids.entry(key).or_insert(next));
    }
    let mut n_classes = ids.len();
    loop {
        let mut sigs: BTreeMap<(usize, Vec<(usize, u8)>), usize> = BTreeMap::new();
        let mut next_color = HashMap::with_capacity(atoms.len());
        for &a in atoms {
            let mut nb: Vec<(usize, u8)> = system
                .neighbors(a)
                .iter()
                .map(|&b| (color[&b], system.bond_order(a, b).map_or(0, |o| o.code())))
                .collect();
            nb.sort_unstable();
            let key = (color[&a], nb);
            let next = sigs.len();
            next_color.insert(a, *sigs.entry(key).or_insert(next));
        }
        color = next_color;
        if sigs.len() == n_classes {
            return color;
        }
        n_classes = sigs.len();
    }
}

struct Search<'a> {
    system: &'a MolecularSystem,
    color: HashMap<usize, usize>,
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    image: HashMap<usize, usize>,
    used: HashMap<usize, bool>,
    members_by_color: HashMap<usize, Vec<usize>>,
    found: Vec<HashMap<usize, usize>>,
    limit: usize,
}

impl Search<'_> {
    fn consistent(&self, v: usize, c: usize) -> bool {
        let sys = self.system;
        let mut assigned_nb = 0;
        for &u in sys.neighbors(v) {
            if let Some(&iu) = self.image.get(&u) {
                assigned_nb += 1;
                if sys.bond_order(c, iu) != sys.bond_order(v, u) {
                    return false;
                }
            }
        }
        let used_nb = sys
            .neighbors(c)
            .iter()
            .filter(|w| self.used.get(w).copied().unwrap_or(false))
            .count();
        used_nb == assigned_nb && sys.neighbors(c).len() == sys.neighbors(v).len()
    }

    fn run(&mut self, pos: usize) {
        if self.found.len() >= self.limit {
            return;
        }
        if pos == self.order.len() {
            self.found.push(self.image.clone());
            return;
        }
        let v = self.order[pos];
        let cv = self.color[&v];
        let mut candidates: Vec<usize> = match self.parent[pos] {
            Some(p) => self.system.neighbors(self.image[&p]).to_vec(),
            None => self.members_by_color[&cv].clone(),
        };
        candidates.retain(|c| self.color.get(c) == Some(&cv) && !self.used[c]);
        // Identity first.
        if let Some(k) = candidates.iter().position(|&c| c == v) {
            candidates.swap(0, k);
            candidates[1..].sort_unstable();
        }
        for c in candidates {
            if !self.consistent(v, c) {
                continue;
            }
            self.image.insert(v, c);
            self.used.insert(c, true);
            self.run(pos + 1);
            self.image.remove(&v);
            self.used.insert(c, false);
            if self.found.len() >= self.limit {
                return;
            }
        }
    }
}

/// Enumerate up to `cap` automorphisms of the subgraph induced by `atoms`
/// (expected to be one connected component of the bond graph).
pub fn automorphisms(system: &MolecularSystem, atoms: &[usize], cap: usize) -> Automorphisms {
    let mut atoms = atoms.to_vec();
    atoms.sort_unstable();
    let color = refined_colors(system, &atoms);
    let mut members_by_color: HashMap<usize, Vec<usize>> = HashMap::new();
    for &a in &atoms {
        members_by_color.entry(color[&a]).or_default().push(a);
    }

    // BFS order starting from a vertex of the smallest colour class; one
    // BFS per piece in case the atom set is not connected.
    let mut order = Vec::with_capacity(atoms.len());
    let mut parent = Vec::with_capacity(atoms.len());
    let mut seen: HashMap<usize, bool> = atoms.iter().map(|&a| (a, false)).collect();
    loop {
        let Some(start) = atoms
            .iter()
            .filter(|a| !seen[a])
            .min_by_key(|a| (members_by_color[&color[a]].len(), **a))
            .copied()
        else {
            break;
        };
        seen.insert(start, true);
        let mut queue = VecDeque::from([(start, None)]);
        while let Some((v, p)) = queue.pop_front() {
            order.push(v);
            parent.push(p);
            for &w in system.neighbors(v) {
                if seen.get(&w) == Some(&false) {
                    seen.insert(w, true);
                    queue.push_back((w, Some(v)));
                }
            }
        }
    }

    let mut search = Search {
        system,
        color,
        order,
        parent,
        image: HashMap::new(),
        used: atoms.iter().map(|&a| (a, false)).collect(),
        members_by_color,
        found: Vec::new(),
        limit: cap.saturating_add(1),
    };
    search.run(0);
    let truncated = search.found.len() > cap;
    search.found.truncate(cap);
    let maps = search
        .found
        .into_iter()
        .map(|img| atoms.iter().map(|a| img[a]).collect())
        .collect();
    Automorphisms {
        atoms,
        maps,
        truncated,
    }
}

/// Exact check that `map` (image of each atom in `atoms`) preserves colours,
/// chain membership and the bond multiset.
pub fn is_automorphism(system: &MolecularSystem, atoms: &[usize], map: &[usize]) -> bool {
    let image: HashMap<usize, usize> = atoms.iter().copied().zip(map.iter().copied()).collect();
    let mut targets: Vec<usize> = map.to_vec();
    targets.sort_unstable();
    let mut sorted = atoms.to_vec();
    sorted.sort_unstable();
    if targets != sorted {
        return false;
    }
    for &a in atoms {
        let (x, y) = (system.atom(a), system.atom(image[&a]));
        if x.element != y.element || x.residue_name != y.residue_name || x.chain_index != y.chain_index {
            return false;
        }
        for &b in atoms {
            if system.bond_order(a, b) != system.bond_order(image[&a], image[&b]) {
                return false;
            }
        }
    }
    true
}
