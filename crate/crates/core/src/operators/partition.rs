use super::{LinearOperator, OperatorKind};
use crate::error::{check_len, Error, Result};
use crate::varexp::{ExponentMap, Signal};

/// Assignment of operator rows to `num_subsets` blocks.
///
/// For Radon operators subset `i` owns the interleaved views
/// `{i, i+N_s, i+2N_s, …}`; dense operators are split into contiguous row
/// blocks of equal size, the last block taking the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPartition {
    pub num_subsets: usize,
    /// Angle indices per subset (row indices for dense operators).
    pub view_indices: Vec<Vec<usize>>,
    pub row_indices: Vec<Vec<usize>>,
}

impl SubsetPartition {
    pub fn for_operator(a: &LinearOperator, num_subsets: usize) -> Result<Self> {
        if num_subsets == 0 {
            return Err(Error::PartitionInvalid("need at least one subset".into()));
        }
        match (a.kind(), a.geometry()) {
            (OperatorKind::Radon, Some(g)) => {
                if num_subsets > g.num_angles {
                    return Err(Error::PartitionInvalid(format!(
                        "{num_subsets} subsets for {} angles",
                        g.num_angles
                    )));
                }
                let view_indices: Vec<Vec<usize>> =
                    (0..num_subsets).map(|i| (i..g.num_angles).step_by(num_subsets).collect()).collect();
                let row_indices =
                    view_indices.iter().map(|views| views.iter().flat_map(|&v| g.rows_of_angle(v)).collect()).collect();
                Ok(Self { num_subsets, view_indices, row_indices })
            }
            _ => {
                let rows = a.rows();
                if num_subsets > rows {
                    return Err(Error::PartitionInvalid(format!("{num_subsets} subsets for {rows} rows")));
                }
                let block = rows / num_subsets;
                let row_indices: Vec<Vec<usize>> = (0..num_subsets)
                    .map(|i| {
                        let end = if i + 1 == num_subsets { rows } else { (i + 1) * block };
                        (i * block..end).collect()
                    })
                    .collect();
                Ok(Self { num_subsets, view_indices: row_indices.clone(), row_indices })
            }
        }
    }
}

/// Data of one block: `A_i`, `y_i` and, when given, the matching `(qₙ)` restriction.
#[derive(Debug, Clone)]
pub struct Subset {
    pub operator: LinearOperator,
    pub data: Signal,
    pub q_map: Option<ExponentMap>,
}

#[derive(Debug, Clone)]
pub struct PartitionedProblem {
    pub partition: SubsetPartition,
    pub subsets: Vec<Subset>,
}

impl PartitionedProblem {
    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }
}

/// Splits operator, data and data-space exponents with the same row selection.
pub fn partition_views(
    a: &LinearOperator,
    y: &[f64],
    q: Option<&ExponentMap>,
    num_subsets: usize,
) -> Result<PartitionedProblem> {
    check_len(a.rows(), y.len())?;
    if let Some(q) = q {
        check_len(a.rows(), q.len())?;
    }
    let partition = SubsetPartition::for_operator(a, num_subsets)?;
    let subsets = partition
        .row_indices
        .iter()
        .map(|rows| {
            Ok(Subset {
                operator: if num_subsets == 1 { a.clone() } else { a.select_rows(rows)? },
                data: Signal::new(rows.iter().map(|&r| y[r]).collect())?,
                q_map: q.map(|q| q.select(rows)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionedProblem { partition, subsets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{radon_build, Geometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paper_layout_thirty_subsets() {
        let g = Geometry::parallel_beam(4, 1.0, 180, 3);
        let a = radon_build(&g).unwrap();
        let part = SubsetPartition::for_operator(&a, 30).unwrap();
        assert!(part.view_indices.iter().all(|v| v.len() == 6));
        assert_eq!(part.view_indices[0], vec![0, 30, 60, 90, 120, 150]);
        assert_eq!(part.view_indices[7], vec![7, 37, 67, 97, 127, 157]);
        assert_eq!(part.row_indices[1][..3], [3, 4, 5]);
    }

    #[test]
    fn partition_covers_all_rows_disjointly() {
        let g = Geometry::parallel_beam(4, 1.0, 13, 3);
        let a = radon_build(&g).unwrap();
        for n in 1..=13 {
            let part = SubsetPartition::for_operator(&a, n).unwrap();
            let mut all: Vec<usize> = part.row_indices.concat();
            all.sort_unstable();
            assert_eq!(all, (0..a.rows()).collect::<Vec<_>>());
        }
        assert!(matches!(SubsetPartition::for_operator(&a, 14), Err(Error::PartitionInvalid(_))));
        assert!(SubsetPartition::for_operator(&a, 0).is_err());
    }

    #[test]
    fn dense_row_blocks_with_remainder() {
        let a = LinearOperator::from_dense(7, 2, vec![1.0; 14]).unwrap();
        let part = SubsetPartition::for_operator(&a, 3).unwrap();
        assert_eq!(part.row_indices, vec![vec![0, 1], vec![2, 3], vec![4, 5, 6]]);
    }

    #[test]
    fn subsets_carry_data_and_exponents() {
        let g = Geometry::parallel_beam(6, 1.0, 4, 5);
        let a = radon_build(&g).unwrap();
        let y: Vec<f64> = (0..a.rows()).map(|r| r as f64).collect();
        let q = ExponentMap::new((0..a.rows()).map(|r| 1.1 + r as f64 * 0.01).collect()).unwrap();
        let prob = partition_views(&a, &y, Some(&q), 2).unwrap();
        let rows = &prob.partition.row_indices[1];
        assert_eq!(prob.subsets[1].data.as_slice(), rows.iter().map(|&r| r as f64).collect::<Vec<_>>().as_slice());
        assert_eq!(prob.subsets[1].q_map.as_ref().unwrap().values()[0], q.values()[rows[0]]);

        let single = partition_views(&a, &y, None, 1).unwrap();
        assert_eq!(single.subsets[0].operator.to_dense(), a.to_dense());
    }

    #[test]
    fn normal_operator_splits_over_subsets() {
        let g = Geometry::parallel_beam(8, 0.5, 10, 9);
        let a = radon_build(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let full = a.adjoint_apply(&a.apply(&x).unwrap()).unwrap();
        for n in [1, 2, 3, 5, 10] {
            let prob = partition_views(&a, &vec![0.0; a.rows()], None, n).unwrap();
            let mut sum = vec![0.0; a.cols()];
            for s in &prob.subsets {
                let part = s.operator.adjoint_apply(&s.operator.apply(&x).unwrap()).unwrap();
                sum.iter_mut().zip(part.iter()).for_each(|(a, b)| *a += b);
            }
            let scale = full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (u, v) in sum.iter().zip(full.iter()) {
                assert!((u - v).abs() <= 1e-10 * scale);
            }
        }
    }
}
