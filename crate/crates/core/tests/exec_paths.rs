use weaksym::analysis::case_catalog;
use weaksym::assembly::{assemble, Discretization, Problem};
use weaksym::derham::ElasticitySpaces;
use weaksym::par::Exec;

#[test]
fn sequential_and_parallel_paths_agree() {
    let case = case_catalog("deformed_square_9patch").unwrap();
    let geo = case.geometry().unwrap();
    let disc = Discretization::new(&geo, ElasticitySpaces::build(2, 3, 1, 2).unwrap(), true).unwrap();
    let load = |x: [f64; 3]| case.load(x);
    let problem = Problem { load: Some(&load), ..Problem::pure_dirichlet(case.params) };
    let seq = assemble(&disc, &problem, Exec::Sequential).unwrap();
    let par = assemble(&disc, &problem, Exec::Parallel).unwrap();
    let (ks, kp) = (seq.full_matrix(), par.full_matrix());
    assert_eq!(ks, kp);
    assert_eq!(seq.rhs(), par.rhs());

    let x: Vec<f64> = (0..ks.ncols()).map(|i| (i as f64 * 0.37).sin()).collect();
    let (mut ys, mut yp) = (vec![0.0; ks.nrows()], vec![0.0; ks.nrows()]);
    ks.matvec(&x, &mut ys, Exec::Sequential);
    ks.matvec(&x, &mut yp, Exec::Parallel);
    assert_eq!(ys, yp);
}
