use std::collections::HashMap;

/// One database hit for a chain's MSA.
#[derive(Debug, Clone, PartialEq)]
pub struct MsaHit {
    pub sequence: String,
    /// Similarity to the query; higher is closer.
    pub similarity: f64,
    pub taxon_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMsa {
    pub query: String,
    pub hits: Vec<MsaHit>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MsaCell {
    Query,
    Paired(usize),
    Unpaired(usize),
    Gap,
}

/// Paired MSA: `rows[r][c]` is the cell of chain `c` in row `r`, referring
/// back into that chain's hit list. Row 0 is always the query row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedMsa {
    pub rows: Vec<Vec<MsaCell>>,
    pub n_paired: usize,
}

impl PairedMsa {
    /// Render rows as concatenated strings, gaps as '-' runs of query length.
    pub fn render(&self, msas: &[ChainMsa]) -> Vec<String> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(msas)
                    .map(|(cell, m)| match cell {
                        MsaCell::Query => m.query.clone(),
                        MsaCell::Paired(h) | MsaCell::Unpaired(h) => m.hits[*h].sequence.clone(),
                        MsaCell::Gap => "-".repeat(m.query.chars().count()),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Compactified pairing: sort each chain's hits by decreasing similarity,
/// form paired rows from hits sharing a taxon id in at least two chains
/// (k-th hit of a taxon pairs with the k-th hit of the same taxon elsewhere),
/// then backfill with the leftover hits of every chain stacked column-wise.
pub fn pair_msa(msas: &[ChainMsa], max_rows: usize) -> PairedMsa {
    let n_chains = msas.len();
    let mut rows = vec![vec![MsaCell::Query; n_chains]];
    if max_rows <= 1 || n_chains == 0 {
        return PairedMsa { rows, n_paired: 0 };
    }

    let order: Vec<Vec<usize>> = msas
        .iter()
        .map(|m| {
            let mut idx: Vec<usize> = (0..m.hits.len()).collect();
            idx.sort_by(|&a, &b| m.hits[b].similarity.total_cmp(&m.hits[a].similarity));
            idx
        })
        .collect();

    // (taxon, occurrence) -> per-chain hit, keyed in first-seen order.
    let mut slots: Vec<(String, usize)> = Vec::new();
    let mut members: HashMap<(String, usize), Vec<Option<usize>>> = HashMap::new();
    for (c, idx) in order.iter().enumerate() {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for &h in idx {
            let Some(taxon) = msas[c].hits[h].taxon_id.as_deref() else {
                continue;
            };
            let k = seen.entry(taxon).or_insert(0);
            let key = (taxon.to_string(), *k);
            *k += 1;
            let entry = members.entry(key.clone()).or_insert_with(|| {
                slots.push(key.clone());
                vec![None; n_chains]
            });
            entry[c] = Some(h);
        }
    }

    let mut used = vec![vec![false; 0]; n_chains];
    for (c, m) in msas.iter().enumerate() {
        used[c] = vec![false; m.hits.len()];
    }
    let mut paired: Vec<(f64, usize, Vec<MsaCell>)> = Vec::new();
    if n_chains >= 2 {
        for (pos, key) in slots.iter().enumerate() {
            let cells = &members[key];
            let present: Vec<(usize, usize)> = cells
                .iter()
                .enumerate()
                .filter_map(|(c, h)| h.map(|h| (c, h)))
                .collect();
            if present.len() < 2 {
                continue;
            }
            let mean_sim = present
                .iter()
                .map(|&(c, h)| msas[c].hits[h].similarity)
                .sum::<f64>()
                / present.len() as f64;
            let mut row = vec![MsaCell::Gap; n_chains];
            for &(c, h) in &present {
                row[c] = MsaCell::Paired(h);
                used[c][h] = true;
            }
            paired.push((mean_sim, pos, row));
        }
    }
    paired.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let n_paired = paired.len().min(max_rows - 1);
    rows.extend(paired.into_iter().take(n_paired).map(|(_, _, r)| r));

    let leftovers: Vec<Vec<usize>> = order
        .iter()
        .enumerate()
        .map(|(c, idx)| idx.iter().copied().filter(|&h| !used[c][h]).collect())
        .collect();
    let depth = leftovers.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..depth {
        if rows.len() >= max_rows {
            break;
        }
        rows.push(
            leftovers
                .iter()
                .map(|l| l.get(k).map_or(MsaCell::Gap, |&h| MsaCell::Unpaired(h)))
                .collect(),
        );
    }
    PairedMsa { rows, n_paired }
}
