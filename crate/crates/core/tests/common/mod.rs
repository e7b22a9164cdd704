#![allow(dead_code)]

use hybrid_volterra::hybrid_operator::{HybridProblem, ProblemBuilder};
use hybrid_volterra::kernel_lang::LipschitzSet;

/// A named test problem with Lipschitz constants that bound its kernels.
pub struct Case {
    pub name: &'static str,
    pub problem: HybridProblem,
}

fn lip(f: impl FnOnce(&mut LipschitzSet)) -> LipschitzSet {
    let mut l = LipschitzSet::default();
    f(&mut l);
    l
}

/// Problems covering fixed impulses, moving impulses with roots, and mixed
/// moving/fixed terms.
pub fn suite(panels: usize) -> Vec<Case> {
    vec![
        Case {
            name: "single fixed impulse",
            problem: ProblemBuilder::new(1.0)
                .kernel("x0", "1")
                .kernel("f1", "x")
                .kernel("G1", "0.5*eta")
                .tau(&[0.5])
                .panels(panels)
                .lipschitz(lip(|l| {
                    l.l1 = 1.0;
                    l.lg1 = 0.5;
                }))
                .build()
                .unwrap(),
        },
        Case {
            name: "two fixed impulses with pair term",
            problem: ProblemBuilder::new(1.0)
                .kernel("x0", "1")
                .kernel("f1", "-x + sin(t)")
                .kernel("f2", "0.3*x1")
                .kernel("G1", "0.2*eta")
                .kernel("G2", "0.1*(etai + etaj)")
                .tau(&[0.3, 0.7])
                .panels(panels)
                .lipschitz(lip(|l| {
                    l.l1 = 1.0;
                    l.l22 = 0.3;
                    l.lg1 = 0.2;
                    l.lg21 = 0.1;
                    l.lg22 = 0.1;
                }))
                .build()
                .unwrap(),
        },
        Case {
            name: "moving impulse sigma = t/2 with mixed terms",
            problem: ProblemBuilder::new(1.0)
                .kernel("x0", "1 + t")
                .kernel("f1", "0.5*x")
                .kernel("G1", "0.2*eta")
                .kernel("G3", "0.2*sin(beta)")
                .kernel("g", "0.3*beta - 0.1*eta")
                .tau(&[0.5])
                .sigma(&["t/2"])
                .h(0.25)
                .panels(panels)
                .lipschitz(lip(|l| {
                    l.l1 = 0.5;
                    l.lg1 = 0.2;
                    l.lg31 = 0.2;
                    l.lsmall_g2 = 0.3;
                    l.lsmall_g3 = 0.1;
                }))
                .build()
                .unwrap(),
        },
        Case {
            name: "moving impulse with interior root",
            problem: ProblemBuilder::new(1.0)
                .kernel("x0", "1")
                .kernel("f1", "0.5*x")
                .kernel("G3", "0.2*beta + 0.1*eta")
                .kernel("g", "0.1*x*cos(beta)")
                .tau(&[0.3])
                .sigma(&["0.5*t + 0.3"])
                .h(0.2)
                .panels(panels)
                .lipschitz(lip(|l| {
                    l.l1 = 0.5;
                    l.lg31 = 0.2;
                    l.lg32 = 0.1;
                    l.lsmall_g1 = 0.5;
                    l.lsmall_g2 = 0.5;
                }))
                .build()
                .unwrap(),
        },
        Case {
            name: "quadratic moving time with two roots",
            problem: ProblemBuilder::new(1.5)
                .kernel("x0", "cos(t)")
                .kernel("f1", "-0.5*x")
                .kernel("f2", "0.2*x1")
                .kernel("G1", "0.3*eta")
                .kernel("G3", "0.1*beta")
                .tau(&[0.4])
                .sigma(&["t^2"])
                .h(0.2)
                .panels(panels)
                .lipschitz(lip(|l| {
                    l.l1 = 0.5;
                    l.l22 = 0.2;
                    l.lg1 = 0.3;
                    l.lg31 = 0.1;
                }))
                .build()
                .unwrap(),
        },
    ]
}
