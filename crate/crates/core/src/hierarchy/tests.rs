use std::sync::{Arc, OnceLock};

use super::*;
use crate::bem::{GalerkinOperator, QuadratureOrders};
use crate::densela::{matmul, LinearOperator};
use crate::geometry::generate_sphere;

struct Fixture {
    op: GalerkinOperator,
    dense: DenseMatrix,
}

fn fixture(layer: LayerPotential) -> &'static Fixture {
    static SLP: OnceLock<Fixture> = OnceLock::new();
    static DLP: OnceLock<Fixture> = OnceLock::new();
    let cell = match layer {
        LayerPotential::Single => &SLP,
        LayerPotential::Double => &DLP,
    };
    cell.get_or_init(|| {
        let mesh = Arc::new(generate_sphere(3).unwrap());
        let op = GalerkinOperator::new(mesh, layer, QuadratureOrders::default()).unwrap();
        let dense = op.assemble_dense();
        Fixture { op, dense }
    })
}

fn rel_matvec_error(a: &dyn LinearOperator, dense: &DenseMatrix) -> f64 {
    let x: Vec<f64> = (0..dense.cols()).map(|j| ((j * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let mut y = vec![0.0; dense.rows()];
    a.apply(&x, &mut y);
    let exact = dense.matvec(&x);
    let num: f64 = y.iter().zip(&exact).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    num / exact.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn partition_covers_every_entry_once() {
    for layer in [LayerPotential::Single, LayerPotential::Double] {
        let f = fixture(layer);
        let p = Partition::new(&f.op, 16, 1.0).unwrap();
        assert_eq!(Arc::ptr_eq(&p.rows, &p.cols), layer == LayerPotential::Single);
        let mut hits = vec![0u8; f.op.row_count() * f.op.col_count()];
        for b in p.blocks.leaves() {
            let blk = p.blocks.node(b);
            for &i in p.rows.indices(blk.row) {
                for &j in p.cols.indices(blk.col) {
                    hits[i * f.op.col_count() + j] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
        assert!(p.admissible_entries() > 0);
    }
}

#[test]
fn pure_green_matrix_converges_in_m() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for m in 2..=5 {
        let h = build_h_green(&f.op, &p, m, 0.5).unwrap();
        for leaf in h.leaves() {
            if let Some(r) = h.block_rank(leaf) {
                assert_eq!(r, 12 * m * m);
            }
        }
        let err = rel_matvec_error(&h, &f.dense);
        match m {
            2 => assert!(err <= 5e-2, "{err}"),
            3 => assert!(err <= 1e-2, "{err}"),
            _ => {}
        }
        assert!(err < last, "m={m}: {err} vs {last}");
        last = err;
    }
}

#[test]
fn hybrid_reproduces_pivot_rows() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    let m = 3;
    let green = build_h_green(&f.op, &p, m, 0.5).unwrap();
    let h = build_h_hybrid(&f.op, &p, m, 0.5, 1e-6).unwrap();
    for (leaf, gleaf) in h.leaves().iter().zip(green.leaves()) {
        assert_eq!(leaf.block, gleaf.block);
        let Some(rank) = h.block_rank(leaf) else { continue };
        assert!(rank <= 12 * m * m);
        let approx = h.block_dense(leaf);
        let exact = f.op.assemble_block(p.rows.indices(leaf.row), p.cols.indices(leaf.col));
        // pivot rows are reproduced exactly
        let left = h.left_factor(leaf.row).unwrap();
        let pivots: Vec<usize> = (0..left.rows()).filter(|&i| (0..left.cols()).any(|k| left[(i, k)] == 1.0)).collect();
        assert!(pivots.len() >= rank);
        let rule = crate::green::build_green_rule(&p.rows.node(leaf.row).bbox, m, 0.5).unwrap();
        let a = crate::green::assemble_a_t(&f.op, f.op.row_side(), p.rows.indices(leaf.row), &rule);
        let ca = crate::crossapprox::aca_full_pivot(&a, 1e-6, usize::MAX).unwrap();
        for &i in &ca.pivot_rows {
            for j in 0..exact.cols() {
                assert!((approx[(i, j)] - exact[(i, j)]).abs() <= 1e-12 * exact.max_abs());
            }
        }
        let err_h = crate::densela::frobenius_norm(&exact.sub(&approx).unwrap());
        let err_g = crate::densela::frobenius_norm(&exact.sub(&green.block_dense(gleaf)).unwrap());
        assert!(err_h <= 10.0 * err_g, "{err_h} {err_g}");
    }
    assert!(rel_matvec_error(&h, &f.dense) < 1e-3);
}

#[test]
fn h2_bases_are_nested_interpolants() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    let h2 = build_h2(&f.op, &p, 3, 0.5, 1e-5).unwrap();
    assert!(h2.shares_basis());
    let basis = h2.row_basis();
    for t in 0..p.rows.len() {
        let v = basis.expand(t);
        let idx = p.rows.indices(t);
        assert_eq!(v.shape(), (idx.len(), basis.rank(t)));
        for (k, piv) in basis.node(t).pivots.iter().enumerate() {
            let row = idx.iter().position(|i| i == piv).unwrap();
            for c in 0..v.cols() {
                let expect = if c == k { 1.0 } else { 0.0 };
                assert!((v[(row, c)] - expect).abs() < 1e-12, "cluster {t}");
            }
        }
        let sons = &p.rows.node(t).sons;
        if sons.is_empty() {
            continue;
        }
        let union: Vec<usize> = sons.iter().flat_map(|&s| basis.node(s).pivots.iter().copied()).collect();
        assert!(basis.node(t).pivots.iter().all(|q| union.contains(q)));
        let mut offset = 0;
        for (&s, e) in sons.iter().zip(&basis.node(t).transfer) {
            let part = v.row_range(offset, offset + p.rows.node(s).size());
            let nested = matmul(&basis.expand(s), e).unwrap();
            assert!(part.sub(&nested).unwrap().max_abs() <= 1e-12 * nested.max_abs().max(1.0));
            offset += p.rows.node(s).size();
        }
    }
}

#[test]
fn h2_matvec_matches_expansion_and_dense() {
    for layer in [LayerPotential::Single, LayerPotential::Double] {
        let f = fixture(layer);
        let p = Partition::new(&f.op, 16, 1.0).unwrap();
        let h2 = build_h2(&f.op, &p, 3, 0.5, 1e-5).unwrap();
        assert_eq!(h2.shares_basis(), layer == LayerPotential::Single);
        let full = h2.to_dense();
        for j in [0, 17, f.op.col_count() - 1] {
            let mut e = vec![0.0; f.op.col_count()];
            e[j] = 1.0;
            let col = h2.matvec(&e).unwrap();
            let scale = full.max_abs();
            for i in 0..full.rows() {
                assert!((col[i] - full[(i, j)]).abs() <= 1e-12 * scale);
            }
        }
        let x: Vec<f64> = (0..full.rows()).map(|i| (i as f64).cos()).collect();
        let yt = h2.matvec_transposed(&x).unwrap();
        let expect = full.matvec_transposed(&x);
        for (a, b) in yt.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-11 * expect.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let cmp = compare_dense(&full, &f.dense).unwrap();
        assert!(cmp.rel_frobenius <= 1e-3, "{layer:?} {cmp:?}");
        assert!(h2.matvec(&[1.0]).is_err());
    }
}

#[test]
fn h2_evaluates_only_pivots_and_nearfield() {
    let f = fixture(LayerPotential::Double);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    f.op.reset_evaluations();
    let h2 = build_h2(&f.op, &p, 2, 0.5, 1e-4).unwrap();
    let coupling: u64 = h2.couplings().map(|(_, _, s)| (s.rows() * s.cols()) as u64).sum();
    let near: u64 = p
        .blocks
        .inadmissible_leaves()
        .iter()
        .map(|&b| (p.rows.node(p.blocks.node(b).row).size() * p.cols.node(p.blocks.node(b).col).size()) as u64)
        .sum();
    assert_eq!(f.op.evaluations(), coupling + near);
}

#[test]
fn stability_ledger_follows_the_recursion() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    // a loose tolerance, so that upper levels actually compress
    let h2 = build_h2(&f.op, &p, 2, 0.5, 1e-2).unwrap();
    let basis = h2.row_basis();
    let ledger = basis.ledger();
    for e in &ledger {
        let sons = &p.rows.node(e.cluster).sons;
        if sons.is_empty() {
            assert_eq!(e.stability, 1.0);
            assert_eq!(e.norm_bound, e.vhat_norm);
            let exact = crate::crossapprox::estimate_norm2(&basis.expand(e.cluster), 200).unwrap();
            assert!((e.vhat_norm - exact).abs() <= 1e-3 * exact);
        } else {
            let m = sons.iter().map(|&s| ledger[s].norm_bound).fold(0.0, f64::max);
            assert_eq!(e.stability, m);
            assert!((e.norm_bound - m * e.vhat_norm).abs() <= 1e-14 * e.norm_bound);
            // the bound dominates the true norm
            let exact = crate::crossapprox::estimate_norm2(&basis.expand(e.cluster), 200).unwrap();
            assert!(exact <= e.norm_bound * (1.0 + 1e-3), "{exact} {}", e.norm_bound);
        }
        assert!(e.vhat_norm >= 1.0 - 1e-9);
    }
    let eps = estimate_local_errors(basis, &f.op.col_supports(), 64, 7, |r, c| f.op.assemble_block(r, c)).unwrap();
    assert_eq!(eps.len(), p.rows.len());
    assert!(eps.iter().all(|e| e.is_finite() && *e >= 0.0));
    assert!(eps.iter().any(|&e| e > 0.0));
}

#[test]
fn partial_pivot_aca_recovers_low_rank() {
    let (r, c, k) = (40, 30, 4);
    let u = DenseMatrix::from_fn(r, k, |i, l| ((i + 1) as f64 * (l + 2) as f64).sin());
    let v = DenseMatrix::from_fn(c, k, |j, l| ((j + 3) as f64 / (l + 1) as f64).cos());
    let x = crate::densela::matmul_transposed(&u, &v).unwrap();
    let (a, b) = partial_pivot_aca(r, c, 1e-12, |i| x.row(i).to_vec(), |j| x.column(j)).unwrap();
    assert!(a.cols() <= k + 1);
    let err = x.sub(&crate::densela::matmul_transposed(&a, &b).unwrap()).unwrap();
    assert!(crate::densela::frobenius_norm(&err) <= 1e-10 * crate::densela::frobenius_norm(&x));

    let zero = DenseMatrix::zeros(5, 4);
    let (a, _) = partial_pivot_aca(5, 4, 1e-6, |i| zero.row(i).to_vec(), |j| zero.column(j)).unwrap();
    assert_eq!(a.cols(), 0);
    assert!(partial_pivot_aca(5, 4, 0.0, |i| zero.row(i).to_vec(), |j| zero.column(j)).is_err());
}

#[test]
fn aca_baseline_tracks_its_tolerance() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    for eps in [1e-3, 1e-5] {
        let h = build_h_aca_baseline(&f.op, &p, eps).unwrap();
        let cmp = compare_dense(&h.to_dense(), &f.dense).unwrap();
        assert!(cmp.rel_frobenius <= 10.0 * eps, "{eps}: {cmp:?}");
        assert!(rel_matvec_error(&h, &f.dense) <= 10.0 * eps);
    }
}

#[test]
fn dense_comparison_basics() {
    let f = fixture(LayerPotential::Single);
    let cmp = compare_dense(&f.dense, &f.dense).unwrap();
    assert_eq!(cmp.rel_frobenius, 0.0);
    assert_eq!(cmp.rel_spectral, 0.0);
    let big = DenseMatrix::zeros(1, DENSE_COMPARISON_LIMIT + 1);
    assert!(compare_dense(&big, &big).is_err());
}

#[test]
fn storage_reports_add_up() {
    let f = fixture(LayerPotential::Single);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    let green = build_h_green(&f.op, &p, 2, 0.5).unwrap().storage();
    let hybrid = build_h_hybrid(&f.op, &p, 2, 0.5, 1e-4).unwrap().storage();
    let h2 = build_h2(&f.op, &p, 2, 0.5, 1e-4).unwrap().storage();
    assert_eq!(green.nearfield_bytes, hybrid.nearfield_bytes);
    assert_eq!(green.nearfield_bytes, h2.nearfield_bytes);
    assert!(hybrid.farfield_bytes < green.farfield_bytes);
    assert_eq!(green.max_rank(), 48);
    assert!(h2.total_bytes() == h2.nearfield_bytes + h2.farfield_bytes);
    assert_eq!(h2.bytes_per_dof(), h2.total_bytes() as f64 / 512.0);
}

#[test]
fn hybrid_linearity_and_zero() {
    let f = fixture(LayerPotential::Double);
    let p = Partition::new(&f.op, 16, 1.0).unwrap();
    let h = build_h_hybrid(&f.op, &p, 2, 1.0, 1e-4).unwrap();
    let n = f.op.col_count();
    assert!(h.matvec(&vec![0.0; n]).unwrap().iter().all(|v| *v == 0.0));
    let x: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
    let z: Vec<f64> = (0..n).map(|j| (j as f64 * 0.3).cos()).collect();
    let comb: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    let (hx, hz, hc) = (h.matvec(&x).unwrap(), h.matvec(&z).unwrap(), h.matvec(&comb).unwrap());
    for k in 0..hx.len() {
        assert!((hc[k] - (2.0 * hx[k] - 3.0 * hz[k])).abs() <= 1e-12 * (1.0 + hc[k].abs()));
    }
    assert!(h.matvec(&x[1..]).is_err());
    let full = h.to_dense();
    let yt = h.matvec_transposed(&vec![1.0; f.op.row_count()]).unwrap();
    let expect = full.matvec_transposed(&vec![1.0; f.op.row_count()]);
    for (a, b) in yt.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}
