//! Split a vector into its (A, B, W) frame coefficients and apply the
//! complex structure on the plane spanned by A and B.
use nalgebra::DVector;
use rotnum::builtin_scene;

fn main() -> rotnum::Result<()> {
    let scene = builtin_scene("sol4_model", &Default::default())?;
    let p = [0.1, 0.3, -0.2, 0.5];
    let at = scene.frame.at(&p)?;
    let v = at.compose(2.0, -1.0, 0.5);
    let d = at.decompose_member(&v)?;
    println!("a = {:.12}, b = {:.12}, c = {:.12}, residual = {:.1e}", d.a, d.b, d.c, d.residual);
    println!("rho = {:.12}", d.rho());

    let jv = at.apply_j(&at.compose(d.a, d.b, 0.0))?;
    println!("J(aA + bB) = {:?}", jv.as_slice());
    println!("omega(A, B) = {}", at.omega(&at.a(), &at.b())?);

    let off = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    match at.decompose_member(&off) {
        Ok(_) => println!("unexpected membership"),
        Err(e) => println!("outside the distribution: {e}"),
    }
    Ok(())
}
