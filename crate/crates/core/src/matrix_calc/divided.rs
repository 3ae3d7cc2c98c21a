use crate::error::{Error, Result};
use crate::function::FunctionModel;
use crate::linalg::C64;

/// Gap below which nodes are treated as coincident.
pub fn confluence_tol(nodes: &[C64]) -> f64 {
    1e-7 * (1.0 + nodes.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Confluent divided difference 𝔇^k f over k+1 nodes.
#[derive(Clone, Debug)]
pub struct DividedDiffTable {
    pub nodes: Vec<C64>,
    pub order: usize,
    pub value: C64,
}

impl DividedDiffTable {
    /// Newton-table evaluation. Nodes closer than `confluence_tol` are
    /// merged into one cluster at their mean and use derivatives there.
    pub fn newton(f: &dyn FunctionModel, nodes: &[C64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("no nodes".into()));
        }
        let tol = confluence_tol(nodes);
        let z = cluster(nodes, tol);
        let n = z.len();
        let mut col: Vec<C64> = z.iter().map(|&x| f.value(x)).collect::<Result<_>>()?;
        let mut factorial = 1.0;
        for j in 1..n {
            factorial *= j as f64;
            let mut next = Vec::with_capacity(n - j);
            for i in 0..(n - j) {
                let (a, b) = (z[i], z[i + j]);
                if a == b {
                    next.push(f.derivative(j, a)? / factorial);
                } else {
                    next.push((col[i + 1] - col[i]) / (b - a));
                }
            }
            col = next;
        }
        Ok(DividedDiffTable {
            nodes: nodes.to_vec(),
            order: n - 1,
            value: col[0],
        })
    }
}

/// Group nodes by single-linkage within `tol`, snap each group to its mean,
/// and return them with group members adjacent.
fn cluster(nodes: &[C64], tol: f64) -> Vec<C64> {
    let n = nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let nx = p[i];
            p[i] = r;
            i = nx;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (nodes[i] - nodes[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    let mut out = Vec::with_capacity(n);
    for (_, members) in groups {
        let mean = members.iter().map(|&i| nodes[i]).sum::<C64>() / members.len() as f64;
        let snapped = if members.len() == 1 { nodes[members[0]] } else { mean };
        out.extend(std::iter::repeat_n(snapped, members.len()));
    }
    out
}

/// 𝔇^k f over `nodes` (k = nodes.len() - 1): closed form when the model has one,
/// otherwise the confluent Newton table.
pub fn dd_value(f: &dyn FunctionModel, nodes: &[C64]) -> Result<C64> {
    match f.exact_divided_difference(nodes) {
        Some(v) => v,
        None => Ok(DividedDiffTable::newton(f, nodes)?.value),
    }
}

/// Real-node divided difference of order k through the Newton table.
pub fn divided_diff(f: &dyn FunctionModel, nodes: &[f64], k: usize) -> Result<f64> {
    if nodes.len() != k + 1 {
        return Err(Error::InvalidArgument(format!(
            "order {k} needs {} nodes, got {}",
            k + 1,
            nodes.len()
        )));
    }
    let z: Vec<C64> = nodes.iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok(DividedDiffTable::newton(f, &z)?.value.re)
}

/// ∑_k f(λ_k) ∏_{j≠k} (λ_k − λ_j)^{-1}; requires distinct nodes.
pub fn divided_diff_explicit(f: &dyn FunctionModel, nodes: &[C64]) -> Result<C64> {
    let mut total = C64::new(0.0, 0.0);
    for (k, &lk) in nodes.iter().enumerate() {
        let mut denom = C64::new(1.0, 0.0);
        for (j, &lj) in nodes.iter().enumerate() {
            if j != k {
                if lk == lj {
                    return Err(Error::InvalidArgument("explicit formula needs distinct nodes".into()));
                }
                denom *= lk - lj;
            }
        }
        total += f.value(lk)? / denom;
    }
    Ok(total)
}
