use std::sync::Arc;

use super::*;
use crate::bem::{BasisKind, LayerPotential, QuadratureOrders};
use crate::cluster::{build_block_tree, build_cluster_tree};
use crate::densela::{frobenius_norm, matmul_transposed, spectral_error};
use crate::geometry::{generate_sphere, TriangleMesh};
use crate::quadrature::triangle_tensor_rule;
use crate::vec3::{affine, dot, sub};

fn unit_cube() -> BoundingBox {
    BoundingBox::new([0.0; 3], [1.0; 3])
}

#[test]
fn cube_rule_with_one_point_per_face() {
    let rule = build_green_rule(&unit_cube(), 1, 0.5).unwrap();
    assert_eq!(rule.delta, 0.5);
    assert_eq!(rule.omega, BoundingBox::new([-0.5; 3], [1.5; 3]));
    assert_eq!(rule.len(), 6);
    for ((z, w), n) in rule.points.iter().zip(&rule.weights).zip(&rule.normals) {
        assert!((w - 4.0).abs() < 1e-14);
        let axis = n.iter().position(|c| *c != 0.0).unwrap();
        assert_eq!(n.iter().map(|c| c.abs()).sum::<f64>(), 1.0);
        for k in 0..3 {
            let expect = if k == axis { 0.5 + n[k] } else { 0.5 };
            assert!((z[k] - expect).abs() < 1e-15, "{z:?} {n:?}");
        }
    }
}

#[test]
fn rule_points_lie_on_the_inflated_boundary() {
    let bbox = BoundingBox::new([0.1, -0.3, 0.2], [0.6, 0.5, 0.3]);
    for m in 1..=6 {
        for scale in [0.5, 1.0] {
            let rule = build_green_rule(&bbox, m, scale).unwrap();
            assert_eq!(rule.len(), 6 * m * m);
            assert_eq!(rule.rank(), 12 * m * m);
            assert!((rule.delta - scale * 0.8).abs() < 1e-15);
            for (z, n) in rule.points.iter().zip(&rule.normals) {
                assert!((bbox.dist_inf_point(z) - rule.delta).abs() < 1e-14);
                let axis = n.iter().position(|c| *c != 0.0).unwrap();
                let plane = if n[axis] > 0.0 { rule.omega.max[axis] } else { rule.omega.min[axis] };
                assert!((z[axis] - plane).abs() < 1e-14);
            }
            let area: f64 = rule.weights.iter().sum();
            let s: [f64; 3] = std::array::from_fn(|k| rule.omega.side(k));
            let exact = 2.0 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2]);
            assert!((area - exact).abs() < 1e-13 * exact);
        }
    }
}

#[test]
fn rule_satisfies_divergence_theorem() {
    // int n . x over the box boundary is 3 vol, int n over it vanishes
    let rule = build_green_rule(&BoundingBox::new([0.0; 3], [1.0, 0.5, 0.25]), 2, 0.5).unwrap();
    let flux: f64 = rule.points.iter().zip(&rule.normals).zip(&rule.weights).map(|((z, n), w)| w * dot(z, n)).sum();
    let vol: f64 = (0..3).map(|k| rule.omega.side(k)).product();
    assert!((flux - 3.0 * vol).abs() < 1e-13 * vol);
    for k in 0..3 {
        let s: f64 = rule.normals.iter().zip(&rule.weights).map(|(n, w)| w * n[k]).sum();
        assert!(s.abs() < 1e-13);
    }
}

#[test]
fn degenerate_inputs_are_rejected() {
    let point = BoundingBox::new([1.0; 3], [1.0; 3]);
    assert!(build_green_rule(&point, 2, 0.5).is_err());
    assert!(build_green_rule(&unit_cube(), 0, 0.5).is_err());
    assert!(build_green_rule(&unit_cube(), 2, 0.0).is_err());
    assert!(build_green_rule(&unit_cube(), 2, f64::NAN).is_err());
}

#[test]
fn representation_formula_reproduces_the_kernel() {
    // g(x, y) = sum w [ g(x, z) dg/dn_z(z, y) - dg/dn_z(x, z) g(z, y) ]
    let x = [0.3, 0.7, 0.4];
    let y = [4.0, 1.5, -2.0];
    let exact = kernel::g(&x, &y);
    let mut last = f64::INFINITY;
    for m in [4, 8, 16, 24] {
        let rule = build_green_rule(&unit_cube(), m, 0.5).unwrap();
        let mut acc = 0.0;
        for ((z, n), w) in rule.points.iter().zip(&rule.normals).zip(&rule.weights) {
            acc += w * (kernel::g(&x, z) * kernel::dg_dn_x(z, &y, n) - kernel::dg_dn_y(&x, z, n) * kernel::g(z, &y));
        }
        let err = (acc - exact).abs() / exact;
        assert!(err < last);
        last = err;
    }
    assert!(last < 1e-10, "{last}");
}

fn single_triangle() -> Arc<TriangleMesh> {
    // a closed mesh is not needed for the factor integrals
    Arc::new(
        TriangleMesh::from_parts(vec![[0.2, 0.3, 0.5], [0.7, 0.35, 0.5], [0.4, 0.8, 0.55]], vec![[0, 1, 2]]).unwrap(),
    )
}

#[test]
fn factor_entries_match_high_order_oracle() {
    let mesh = single_triangle();
    let op = GalerkinOperator::new(mesh.clone(), LayerPotential::Single, QuadratureOrders { regular: 10, singular: 5 })
        .unwrap();
    let rule = build_green_rule(&unit_cube(), 1, 0.5).unwrap();
    let a = assemble_a_t(&op, op.row_side(), &[0], &rule);
    assert_eq!(a.shape(), (1, 12));

    let oracle = triangle_tensor_rule(12).unwrap();
    let c = mesh.corners(0);
    let (e1, e2) = (sub(&c[1], &c[0]), sub(&c[2], &c[0]));
    let jac = 2.0 * mesh.area(0);
    for nu in 0..rule.len() {
        let (z, n) = (&rule.points[nu], &rule.normals[nu]);
        let (mut ig, mut idn) = (0.0, 0.0);
        for (p, w) in oracle.points.iter().zip(&oracle.weights) {
            let x = affine(&c[0], &e1, &e2, p[0], p[1]);
            ig += jac * w * kernel::g(&x, z);
            idn += jac * w * kernel::dg_dn_y(&x, z, n);
        }
        let sw = rule.weights[nu].sqrt();
        assert!((a[(0, nu)] - sw * ig).abs() < 1e-8 * sw * ig.abs());
        assert!((a[(0, 6 + nu)] - 0.5 * sw * idn).abs() < 1e-8 * (sw * idn.abs()).max(1e-3));
    }
}

#[test]
fn delta_prefactor_scales_the_second_blocks() {
    let mesh = single_triangle();
    let op = GalerkinOperator::single_layer(mesh).unwrap();
    let rule = build_green_rule(&unit_cube(), 2, 0.5).unwrap();
    let doubled = GreenRule { delta: 2.0 * rule.delta, ..rule.clone() };
    let (a1, a2) = (assemble_a_t(&op, op.row_side(), &[0], &rule), assemble_a_t(&op, op.row_side(), &[0], &doubled));
    let (b1, b2) = (assemble_b_ts(&op, op.col_side(), &[0], &rule), assemble_b_ts(&op, op.col_side(), &[0], &doubled));
    let k = rule.len();
    for c in 0..2 * k {
        let (fa, fb) = if c < k { (1.0, 1.0) } else { (2.0, 0.5) };
        assert!((a2[(0, c)] - fa * a1[(0, c)]).abs() <= 1e-15 * a1[(0, c)].abs().max(1e-300));
        assert!((b2[(0, c)] - fb * b1[(0, c)]).abs() <= 1e-15 * b1[(0, c)].abs().max(1e-300));
    }
}

#[test]
fn single_layer_factors_swap_blocks() {
    // constant basis and identity on both sides: B = [A_- / delta | -A_+ / delta]
    let mesh = single_triangle();
    let op = GalerkinOperator::single_layer(mesh).unwrap();
    let rule = build_green_rule(&unit_cube(), 3, 1.0).unwrap();
    let a = assemble_a_t(&op, op.row_side(), &[0], &rule);
    let b = assemble_b_ts(&op, op.col_side(), &[0], &rule);
    let k = rule.len();
    for c in 0..k {
        assert!((b[(0, c)] - a[(0, k + c)] / rule.delta).abs() < 1e-15 * b[(0, c)].abs().max(1e-12));
        assert!((b[(0, k + c)] + a[(0, c)] / rule.delta).abs() < 1e-15 * b[(0, k + c)].abs().max(1e-12));
    }
}

#[test]
fn empty_index_set_gives_empty_factor() {
    let op = GalerkinOperator::single_layer(single_triangle()).unwrap();
    let rule = build_green_rule(&unit_cube(), 2, 0.5).unwrap();
    assert_eq!(assemble_a_t(&op, op.row_side(), &[], &rule).shape(), (0, 48));
    assert_eq!(assemble_b_ts(&op, op.col_side(), &[], &rule).shape(), (0, 48));
}

fn admissible_block(op: &GalerkinOperator, leaf: usize) -> (ClusterTree, ClusterTree, usize, usize) {
    let rows = build_cluster_tree(op.row_supports(), leaf).unwrap();
    let cols = build_cluster_tree(op.col_supports(), leaf).unwrap();
    let blocks = build_block_tree(&rows, &cols, 1.0, false).unwrap();
    let b = blocks
        .admissible_leaves()
        .into_iter()
        .max_by_key(|&b| {
            let blk = blocks.node(b);
            rows.node(blk.row).size() * cols.node(blk.col).size()
        })
        .unwrap();
    let blk = blocks.node(b);
    (rows, cols, blk.row, blk.col)
}

#[test]
fn green_block_converges_in_m() {
    let mesh = Arc::new(generate_sphere(3).unwrap());
    for layer in [LayerPotential::Single, LayerPotential::Double] {
        let op = GalerkinOperator::new(mesh.clone(), layer, QuadratureOrders::default()).unwrap();
        let (rows, cols, t, s) = admissible_block(&op, 16);
        let exact = op.assemble_block(rows.indices(t), cols.indices(s));
        let mut last = f64::INFINITY;
        for m in 1..=6 {
            let f = green_block(&op, &rows, t, &cols, s, m, 0.5).unwrap();
            assert_eq!(f.a.cols(), 12 * m * m);
            let err = spectral_error(&exact, &f.to_dense(), 50).unwrap()
                / spectral_error(&exact, &DenseMatrix::zeros(exact.rows(), exact.cols()), 50).unwrap();
            assert!(err < last, "{layer:?} m={m}: {err} vs {last}");
            last = err;
        }
        assert!(last < 2e-3, "{layer:?}: {last}");
    }
}

#[test]
fn double_layer_factor_uses_linear_column_basis() {
    let mesh = Arc::new(generate_sphere(3).unwrap());
    let op = GalerkinOperator::double_layer(mesh.clone()).unwrap();
    assert_eq!(op.col_space().kind(), BasisKind::Linear);
    let (rows, cols, t, s) = admissible_block(&op, 16);
    let f = green_block(&op, &rows, t, &cols, s, 4, 0.5).unwrap();
    assert_eq!(f.b.rows(), cols.indices(s).len());
    let exact = op.assemble_block(rows.indices(t), cols.indices(s));
    let approx = matmul_transposed(&f.a, &f.b).unwrap();
    assert!(frobenius_norm(&exact.sub(&approx).unwrap()) < 1e-2 * frobenius_norm(&exact));
}

#[test]
fn blocks_touching_the_green_box_are_rejected() {
    let mesh = Arc::new(generate_sphere(2).unwrap());
    let op = GalerkinOperator::single_layer(mesh).unwrap();
    let tree = build_cluster_tree(op.row_supports(), 8).unwrap();
    let leaf = tree.leaves().next().unwrap();
    let err = green_block(&op, &tree, leaf, &tree, leaf, 2, 0.5).unwrap_err();
    assert!(matches!(err, Error::ContractViolation(_)));
}
