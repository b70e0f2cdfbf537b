//! Nodal Lagrange bases of degree 1 to 3 on the reference triangle.
//!
//! Local node order: the three vertices, then `degree - 1` nodes on each
//! local edge (edge `e` runs from vertex `e` to vertex `(e + 1) % 3`, nodes
//! ordered from its start), then interior nodes.

const GRAD_BARY: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Vertex(usize),
    /// `(i, j, k)`: k-th node of edge from vertex `i` to vertex `j`
    Edge(usize, usize, usize),
    Interior,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        assert!((1..=3).contains(&degree), "unsupported degree {degree}");
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut nodes = verts.to_vec();
        for e in 0..3 {
            let (a, b) = (verts[e], verts[(e + 1) % 3]);
            for k in 1..degree {
                let t = k as f64 / degree as f64;
                nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        if degree == 3 {
            nodes.push([1.0 / 3.0, 1.0 / 3.0]);
        }
        ReferenceElement { degree, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    fn node_kind(&self, i: usize) -> NodeKind {
        let l = self.degree;
        if i < 3 {
            NodeKind::Vertex(i)
        } else if i < 3 + 3 * (l - 1) {
            let e = (i - 3) / (l - 1);
            NodeKind::Edge(e, (e + 1) % 3, (i - 3) % (l - 1) + 1)
        } else {
            NodeKind::Interior
        }
    }

    /// Values and reference gradients of all basis functions at `point`.
    pub fn eval(&self, point: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let lam = [1.0 - point[0] - point[1], point[0], point[1]];
        for i in 0..self.num_basis() {
            let (v, dl) = self.eval_bary(i, lam);
            values[i] = v;
            let mut g = [0.0; 2];
            for m in 0..3 {
                g[0] += dl[m] * GRAD_BARY[m][0];
                g[1] += dl[m] * GRAD_BARY[m][1];
            }
            grads[i] = g;
        }
    }

    /// Basis function `i` and its partial derivatives in barycentric coordinates.
    fn eval_bary(&self, i: usize, lam: [f64; 3]) -> (f64, [f64; 3]) {
        let mut d = [0.0; 3];
        let v = match (self.degree, self.node_kind(i)) {
            (1, NodeKind::Vertex(a)) => {
                d[a] = 1.0;
                lam[a]
            }
            (2, NodeKind::Vertex(a)) => {
                let x = lam[a];
                d[a] = 4.0 * x - 1.0;
                x * (2.0 * x - 1.0)
            }
            (2, NodeKind::Edge(a, b, _)) => {
                d[a] = 4.0 * lam[b];
                d[b] = 4.0 * lam[a];
                4.0 * lam[a] * lam[b]
            }
            (3, NodeKind::Vertex(a)) => {
                let x = lam[a];
                d[a] = 0.5 * (27.0 * x * x - 18.0 * x + 2.0);
                0.5 * x * (3.0 * x - 1.0) * (3.0 * x - 2.0)
            }
            (3, NodeKind::Edge(a, b, k)) => {
                // node k = 1 sits at lam_a = 2/3, node k = 2 at lam_b = 2/3
                let (near, far) = if k == 1 { (a, b) } else { (b, a) };
                let (x, y) = (lam[near], lam[far]);
                d[near] = 4.5 * (6.0 * x * y - y);
                d[far] = 4.5 * (3.0 * x * x - x);
                4.5 * x * y * (3.0 * x - 1.0)
            }
            (3, NodeKind::Interior) => {
                d = [27.0 * lam[1] * lam[2], 27.0 * lam[0] * lam[2], 27.0 * lam[0] * lam[1]];
                27.0 * lam[0] * lam[1] * lam[2]
            }
            (deg, kind) => unreachable!("degree {deg} has no node {kind:?}"),
        };
        (v, d)
    }
}
