//! Symbolic differentiation over [`Node`] trees.

use super::{Func, Node};

pub(super) fn differentiate(node: &Node, var: usize) -> Node {
    match node {
        Node::Num(_) => Node::Num(0.0),
        Node::Var(i) => Node::Num(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(differentiate(a, var)),
        Node::Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        Node::Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        Node::Mul(a, b) => add(
            mul(differentiate(a, var), (**b).clone()),
            mul((**a).clone(), differentiate(b, var)),
        ),
        Node::Div(a, b) => {
            let num = sub(
                mul(differentiate(a, var), (**b).clone()),
                mul((**a).clone(), differentiate(b, var)),
            );
            div(num, mul((**b).clone(), (**b).clone()))
        }
        Node::Pow(a, b) => {
            let da = differentiate(a, var);
            if let Node::Num(c) = **b {
                // power rule with constant exponent
                let power = Node::Pow(a.clone(), Box::new(Node::Num(c - 1.0)));
                return mul(Node::Num(c), mul(power, da));
            }
            let db = differentiate(b, var);
            // a^b (b' log a + b a'/a)
            let term1 = mul(db, Node::Func(Func::Log, a.clone()));
            let term2 = mul((**b).clone(), div(da, (**a).clone()));
            mul((*node).clone(), add(term1, term2))
        }
        Node::Func(f, a) => {
            let da = differentiate(a, var);
            match f {
                Func::Sin => mul(Node::Func(Func::Cos, a.clone()), da),
                Func::Cos => neg(mul(Node::Func(Func::Sin, a.clone()), da)),
                Func::Exp => mul(Node::Func(Func::Exp, a.clone()), da),
                Func::Log => div(da, (**a).clone()),
                Func::Sqrt => div(da, mul(Node::Num(2.0), Node::Func(Func::Sqrt, a.clone()))),
                Func::Abs => mul(Node::StrictSgn(a.clone()), da),
                // zero away from zeros of the argument; keep the strict
                // factor so evaluation at a zero still errors
                Func::Sgn => Node::Mul(
                    Box::new(Node::Num(0.0)),
                    Box::new(Node::StrictSgn(a.clone())),
                ),
            }
        }
        // d/dt eps(u)|u|^c = c |u|^{c-1} u'; c = 1 is the identity map
        Node::SPow(a, c) => {
            if *c == 1.0 {
                return differentiate(a, var);
            }
            mul(
                Node::Num(*c),
                mul(Node::AbsPow(a.clone(), c - 1.0), differentiate(a, var)),
            )
        }
        // d/dt |u|^q = q |u|^{q-1} sgn(u) u'
        Node::AbsPow(a, q) => mul(
            Node::Num(*q),
            mul(
                Node::AbsPow(a.clone(), q - 1.0),
                mul(Node::StrictSgn(a.clone()), differentiate(a, var)),
            ),
        ),
        Node::StrictSgn(a) => Node::Mul(
            Box::new(Node::Num(0.0)),
            Box::new(Node::StrictSgn(a.clone())),
        ),
    }
}

fn is_zero(node: &Node) -> bool {
    matches!(node, Node::Num(v) if *v == 0.0)
}

fn is_one(node: &Node) -> bool {
    matches!(node, Node::Num(v) if *v == 1.0)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(v) => Node::Num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
        return Node::Num(x + y);
    }
    Node::Add(Box::new(a), Box::new(b))
}

fn sub(a: Node, b: Node) -> Node {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return neg(b);
    }
    if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
        return Node::Num(x - y);
    }
    Node::Sub(Box::new(a), Box::new(b))
}

fn mul(a: Node, b: Node) -> Node {
    if is_zero(&a) || is_zero(&b) {
        return Node::Num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
        return Node::Num(x * y);
    }
    Node::Mul(Box::new(a), Box::new(b))
}

fn div(a: Node, b: Node) -> Node {
    if is_zero(&a) {
        return Node::Num(0.0);
    }
    if is_one(&b) {
        return a;
    }
    if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
        return Node::Num(x / y);
    }
    Node::Div(Box::new(a), Box::new(b))
}
