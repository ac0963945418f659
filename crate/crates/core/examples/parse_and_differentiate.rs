//! Parse a vector field and evaluate it with its Jacobian.
use rotnum::parse_field;

fn main() -> rotnum::Result<()> {
    let field = parse_field("[x2; -sin(x1) + 0.1*x2^2; exp(-x3) * cos(x1)]", 3)?;
    let p = [0.4, -0.2, 1.0];
    println!("field   = {field}");
    println!("value   = {:?}", field.eval(&p)?.as_slice());
    let (v, dv) = field.jvp(&p, &[1.0, 0.0, 0.0])?;
    println!("d/dx1   = {:?} (value {:?})", dv.as_slice(), v.as_slice());
    println!("jacobian =\n{}", field.jacobian(&p)?);
    Ok(())
}
