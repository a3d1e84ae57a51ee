//! Truncated Taylor jets: value, gradient and second-order coefficients of a
//! smooth map, checked against central differences.

use dads::jets::scalar_map;

fn main() -> Result<(), dads::JetError> {
    // f(x, y) = e^{x}·sin(y) + x²y
    let f = scalar_map("f", 2, |u| {
        &(&u[0].exp() * &u[1].sin()) + &(&u[0].square() * &u[1])
    });
    let p = [0.3, -1.1];
    let jets = f.taylor(&p, 2)?;
    let j = &jets[0];
    println!("f{p:?} = {:.12}", j.value());
    println!("gradient (jets)  = {:?}", j.gradient());

    let h = 1e-6;
    let fd: Vec<f64> = (0..2)
        .map(|i| {
            let mut hi = p;
            let mut lo = p;
            hi[i] += h;
            lo[i] -= h;
            (f.eval(&hi).unwrap()[0] - f.eval(&lo).unwrap()[0]) / (2.0 * h)
        })
        .collect();
    println!("gradient (diffs) = {fd:?}");
    println!("d²f/dxdy coefficient = {:.12}", j.coeff(&[1, 1]));
    Ok(())
}
