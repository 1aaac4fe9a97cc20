use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Rows fetched through a sorted access pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gathered {
    pub width: usize,
    /// `ids.len()` rows, in the caller's original id order.
    pub rows: Vec<f64>,
    /// `sorted[i] = ids[perm[i]]`.
    pub perm: Vec<usize>,
    /// `inverse[perm[i]] = i`.
    pub inverse: Vec<usize>,
}

impl Gathered {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }
}

/// Fetches `table[ids]` by sorting the ids, reading the rows in ascending
/// order, then permuting them back. Duplicates are preserved.
pub fn gather_sorted(ids: &[NodeId], table: &[f64], width: usize) -> Result<Gathered> {
    let rows_in_table = if width == 0 { 0 } else { table.len() / width };
    if let Some(&bad) = ids.iter().find(|&&id| id >= rows_in_table) {
        return Err(Error::OutOfBounds {
            id: bad,
            rows: rows_in_table,
        });
    }
    let mut perm: Vec<usize> = (0..ids.len()).collect();
    perm.sort_by_key(|&i| (ids[i], i));
    let mut sorted_rows = Vec::with_capacity(ids.len() * width);
    for &i in &perm {
        let id = ids[i];
        sorted_rows.extend_from_slice(&table[id * width..(id + 1) * width]);
    }
    let mut inverse = vec![0; ids.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    let mut rows = Vec::with_capacity(ids.len() * width);
    for &s in &inverse {
        rows.extend_from_slice(&sorted_rows[s * width..(s + 1) * width]);
    }
    Ok(Gathered {
        width,
        rows,
        perm,
        inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(n: usize, width: usize) -> Vec<f64> {
        (0..n * width).map(|i| i as f64 * 0.5).collect()
    }

    fn direct(ids: &[NodeId], t: &[f64], width: usize) -> Vec<f64> {
        ids.iter()
            .flat_map(|&i| t[i * width..(i + 1) * width].to_vec())
            .collect()
    }

    #[test]
    fn sorted_ids_give_identity() {
        let t = table(10, 2);
        let g = gather_sorted(&[1, 4, 7], &t, 2).unwrap();
        assert_eq!(g.perm, vec![0, 1, 2]);
        assert_eq!(g.inverse, vec![0, 1, 2]);
    }

    #[test]
    fn scattered_ids_match_direct_gather() {
        let t = table(5000, 3);
        let ids = [3, 1027, 58, 4521, 12];
        let g = gather_sorted(&ids, &t, 3).unwrap();
        assert_eq!(g.rows, direct(&ids, &t, 3));
        assert_eq!(g.row(1), &t[1027 * 3..1028 * 3]);
    }

    #[test]
    fn duplicates_are_kept() {
        let t = table(6, 2);
        let g = gather_sorted(&[5, 2, 5], &t, 2).unwrap();
        assert_eq!(g.rows, direct(&[5, 2, 5], &t, 2));
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let t = table(4, 2);
        assert_eq!(
            gather_sorted(&[1, 4], &t, 2).unwrap_err(),
            Error::OutOfBounds { id: 4, rows: 4 }
        );
    }

    proptest! {
        #[test]
        fn roundtrip(ids in proptest::collection::vec(0usize..50, 0..60), width in 1usize..4) {
            let t = table(50, width);
            let g = gather_sorted(&ids, &t, width).unwrap();
            prop_assert_eq!(g.rows, direct(&ids, &t, width));
            for (i, &p) in g.perm.iter().enumerate() {
                prop_assert_eq!(g.inverse[p], i);
            }
            prop_assert!(g.perm.windows(2).all(|w| ids[w[0]] <= ids[w[1]]));
        }
    }
}
