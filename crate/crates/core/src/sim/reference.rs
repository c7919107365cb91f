use std::collections::BTreeMap;

use crate::algebra::TensorAlgebra;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub type Inputs<T> = BTreeMap<String, Tensor<T>>;

/// Checks that every input is present with the extents the algebra implies.
pub fn check_inputs<T: Element>(algebra: &TensorAlgebra, inputs: &Inputs<T>) -> Result<()> {
    for access in &algebra.inputs {
        let name = &access.tensor_name;
        let t = inputs.get(name).ok_or_else(|| Error::Extent {
            tensor: name.clone(),
            message: "missing input".into(),
        })?;
        let want = algebra.extents(access);
        if t.extents != want {
            return Err(Error::Extent {
                tensor: name.clone(),
                message: format!("extents {:?}, expected {:?}", t.extents, want),
            });
        }
    }
    Ok(())
}

/// Random inputs with the extents the algebra implies.
pub fn random_inputs<T: Element, R: rand::Rng>(algebra: &TensorAlgebra, rng: &mut R) -> Inputs<T> {
    let mut out = BTreeMap::new();
    for access in &algebra.inputs {
        out.entry(access.tensor_name.clone())
            .or_insert_with(|| Tensor::random(&algebra.extents(access), rng));
    }
    out
}

/// Direct loop-nest evaluation, iterators in declaration order.
pub fn reference_execute<T: Element>(algebra: &TensorAlgebra, inputs: &Inputs<T>) -> Result<Tensor<T>> {
    check_inputs(algebra, inputs)?;
    let mut out = Tensor::zeros(&algebra.extents(&algebra.output));
    let bounds = algebra.bounds();
    if bounds.contains(&0) {
        return Ok(out);
    }
    let operands: Vec<&Tensor<T>> = algebra
        .inputs
        .iter()
        .map(|a| &inputs[&a.tensor_name])
        .collect();
    let mut x = vec![0i64; bounds.len()];
    loop {
        let mut prod: Option<T> = None;
        for (access, t) in algebra.inputs.iter().zip(&operands) {
            let v = t.get(&access.index(&x)).expect("extents checked");
            prod = Some(match prod {
                Some(p) => p * v,
                None => v,
            });
        }
        let o = out.offset(&algebra.output.index(&x)).expect("output extent");
        out.data[o] = out.data[o] + prod.expect("at least one input");
        // odometer, last iterator fastest
        let mut d = bounds.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            x[d] += 1;
            if (x[d] as usize) < bounds[d] {
                break;
            }
            x[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gemm() {
        let alg = TensorAlgebra::parse("C[m,n] += A[m,k] * B[n,k]; m=2 n=2 k=2").unwrap();
        let eye = Tensor::from_vec(&[2, 2], vec![1i64, 0, 0, 1]).unwrap();
        let inputs = BTreeMap::from([("A".to_string(), eye.clone()), ("B".to_string(), eye.clone())]);
        assert_eq!(reference_execute(&alg, &inputs).unwrap(), eye);
    }

    #[test]
    fn depthwise_window_sums() {
        let alg = TensorAlgebra::parse("O[c,y,x] += I[c,y+p,x+q] * W[c,p,q]; c=1 y=2 x=2 p=2 q=2").unwrap();
        let input = Tensor::from_vec(&[1, 3, 3], (1..=9).collect::<Vec<i64>>()).unwrap();
        let w = Tensor::from_vec(&[1, 2, 2], vec![1i64; 4]).unwrap();
        let inputs = BTreeMap::from([("I".to_string(), input), ("W".to_string(), w)]);
        let out = reference_execute(&alg, &inputs).unwrap();
        // 1+2+4+5, 2+3+5+6, 4+5+7+8, 5+6+8+9
        assert_eq!(out.data, vec![12, 16, 24, 28]);
    }

    #[test]
    fn extent_mismatch() {
        let alg = TensorAlgebra::parse("C[m,n] += A[m,k] * B[n,k]; m=2 n=2 k=2").unwrap();
        let t = Tensor::<i64>::zeros(&[2, 3]);
        let inputs = BTreeMap::from([("A".to_string(), t.clone()), ("B".to_string(), t)]);
        assert!(matches!(reference_execute(&alg, &inputs), Err(Error::Extent { .. })));
    }
}
