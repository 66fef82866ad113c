use super::ForestError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red,
    Black,
}

impl Color {
    pub fn letter(self) -> char {
        match self {
            Color::Red => 'r',
            Color::Black => 'b',
        }
    }
}

/// One branch of a tree, stored in preorder. The left child of an internal
/// node sits immediately after it; `right` points at the right child.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub length: f64,
    pub color: Option<Color>,
    right: u32,
}

impl Node {
    /// `right == 0` marks a leaf.
    pub(crate) fn raw(length: f64, color: Option<Color>, right: u32) -> Node {
        Node {
            length,
            color,
            right,
        }
    }

    pub(crate) fn set_right(&mut self, right: u32) {
        self.right = right;
    }
}

/// Rooted binary plane tree with positive branch lengths, stored as a flat
/// preorder arena. Index 0 is the trunk.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneTree {
    nodes: Vec<Node>,
}

impl PlaneTree {
    pub fn leaf(length: f64, color: Option<Color>) -> Self {
        PlaneTree {
            nodes: vec![Node {
                length,
                color,
                right: 0,
            }],
        }
    }

    pub fn join(length: f64, color: Option<Color>, left: PlaneTree, right: PlaneTree) -> Self {
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        let left_off = 1u32;
        let right_off = 1 + left.nodes.len() as u32;
        nodes.push(Node {
            length,
            color,
            right: right_off,
        });
        nodes.extend(left.nodes.iter().map(|n| shifted(n, left_off)));
        nodes.extend(right.nodes.iter().map(|n| shifted(n, right_off)));
        PlaneTree { nodes }
    }

    pub(crate) fn from_preorder_unchecked(nodes: Vec<Node>) -> Self {
        PlaneTree { nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn children(&self, i: usize) -> Option<(usize, usize)> {
        let r = self.nodes[i].right;
        if r == 0 {
            None
        } else {
            Some((i + 1, r as usize))
        }
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].right == 0
    }

    pub fn trunk_length(&self) -> f64 {
        self.nodes[0].length
    }

    pub fn trunk_color(&self) -> Option<Color> {
        self.nodes[0].color
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.right == 0).count()
    }

    pub fn total_length(&self) -> f64 {
        self.nodes.iter().map(|n| n.length).sum()
    }

    pub fn is_colored(&self) -> bool {
        self.nodes[0].color.is_some()
    }

    pub fn set_color(&mut self, i: usize, color: Option<Color>) {
        self.nodes[i].color = color;
    }

    pub fn set_length(&mut self, i: usize, length: f64) {
        self.nodes[i].length = length;
    }

    /// Parent index of every node (`usize::MAX` for the trunk).
    pub fn parents(&self) -> Vec<usize> {
        let mut parent = vec![usize::MAX; self.nodes.len()];
        for i in 0..self.nodes.len() {
            if let Some((l, r)) = self.children(i) {
                parent[l] = i;
                parent[r] = i;
            }
        }
        parent
    }

    /// Height of the top of each branch above the root's base.
    pub fn top_heights(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.nodes.len()];
        h[0] = self.nodes[0].length;
        for i in 0..self.nodes.len() {
            if let Some((l, r)) = self.children(i) {
                h[l] = h[i] + self.nodes[l].length;
                h[r] = h[i] + self.nodes[r].length;
            }
        }
        h
    }

    pub fn height(&self) -> f64 {
        self.top_heights().into_iter().fold(0.0, f64::max)
    }

    /// Node indices in postorder (children before parents, left before right).
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(0usize, false)];
        while let Some((i, expanded)) = stack.pop() {
            match (self.children(i), expanded) {
                (Some((l, r)), false) => {
                    stack.push((i, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(i),
            }
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].right == 0)
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.nodes.is_empty() {
            return Err(ForestError::EmptyTree);
        }
        let colored = self.nodes[0].color.is_some();
        for (i, n) in self.nodes.iter().enumerate() {
            if !(n.length > 0.0 && n.length.is_finite()) {
                return Err(ForestError::NonPositiveLength(n.length));
            }
            if n.color.is_some() != colored {
                return Err(ForestError::MixedColoring);
            }
            if let (Some(c), Some((l, r))) = (n.color, self.children(i)) {
                let (cl, cr) = (self.nodes[l].color, self.nodes[r].color);
                match c {
                    Color::Red if cl != Some(Color::Red) || cr != Some(Color::Red) => {
                        return Err(ForestError::ColorInvariant { node: i });
                    }
                    Color::Black if cl != Some(Color::Black) && cr != Some(Color::Black) => {
                        return Err(ForestError::ColorInvariant { node: i });
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Same combinatorial structure with unit lengths and no colours.
    pub fn shape_of(&self) -> PlaneTree {
        PlaneTree {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    length: 1.0,
                    color: None,
                    right: n.right,
                })
                .collect(),
        }
    }

    pub fn uncolored(&self) -> PlaneTree {
        PlaneTree {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node { color: None, ..*n })
                .collect(),
        }
    }

    /// Left-right mirror image.
    pub fn mirror(&self) -> PlaneTree {
        let mut b = TreeBuilder::new();
        let mut built = vec![0u32; self.nodes.len()];
        for i in self.postorder() {
            let n = &self.nodes[i];
            built[i] = match self.children(i) {
                None => b.leaf(n.length, n.color),
                Some((l, r)) => b.join(n.length, n.color, built[r], built[l]),
            };
        }
        b.finish(built[0])
    }

    /// Structural equality with lengths compared relative to the tree's height.
    pub fn approx_eq(&self, other: &PlaneTree, rel_tol: f64) -> bool {
        if self.nodes.len() != other.nodes.len() {
            return false;
        }
        let scale = self.height().max(other.height());
        self.nodes.iter().zip(&other.nodes).all(|(a, b)| {
            a.right == b.right
                && a.color == b.color
                && (a.length - b.length).abs() <= rel_tol * scale
        })
    }

    /// One past the last preorder index of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut j = i;
        while let Some((_, r)) = self.children(j) {
            j = r;
        }
        j + 1
    }

    /// Copy of the subtree rooted at `i`.
    pub fn subtree(&self, i: usize) -> PlaneTree {
        let end = self.subtree_end(i);
        let off = i as u32;
        PlaneTree {
            nodes: self.nodes[i..end]
                .iter()
                .map(|n| Node {
                    right: if n.right == 0 { 0 } else { n.right - off },
                    ..*n
                })
                .collect(),
        }
    }

    /// Compact colour/shape key such as `b(r,b)`; lengths are ignored.
    pub fn shape_key(&self) -> String {
        let mut s = String::with_capacity(self.nodes.len() * 3);
        let mut stack: Vec<Result<usize, char>> = vec![Ok(0)];
        while let Some(item) = stack.pop() {
            match item {
                Err(c) => s.push(c),
                Ok(i) => {
                    s.push(self.nodes[i].color.map_or('x', Color::letter));
                    if let Some((l, r)) = self.children(i) {
                        s.push('(');
                        stack.push(Err(')'));
                        stack.push(Ok(r));
                        stack.push(Err(','));
                        stack.push(Ok(l));
                    }
                }
            }
        }
        s
    }
}

fn shifted(n: &Node, off: u32) -> Node {
    Node {
        right: if n.right == 0 { 0 } else { n.right + off },
        ..*n
    }
}

#[derive(Clone, Copy, Debug)]
struct RawNode {
    length: f64,
    color: Option<Color>,
    children: Option<(u32, u32)>,
}

/// Bottom-up tree construction. Subtrees are handles into an arena;
/// `finish` lays a finished tree out in preorder without recursion.
#[derive(Default)]
pub struct TreeBuilder {
    raw: Vec<RawNode>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, length: f64, color: Option<Color>) -> u32 {
        self.raw.push(RawNode {
            length,
            color,
            children: None,
        });
        (self.raw.len() - 1) as u32
    }

    pub fn join(&mut self, length: f64, color: Option<Color>, left: u32, right: u32) -> u32 {
        self.raw.push(RawNode {
            length,
            color,
            children: Some((left, right)),
        });
        (self.raw.len() - 1) as u32
    }

    pub fn length(&self, h: u32) -> f64 {
        self.raw[h as usize].length
    }

    pub fn set_length(&mut self, h: u32, length: f64) {
        self.raw[h as usize].length = length;
    }

    pub fn color(&self, h: u32) -> Option<Color> {
        self.raw[h as usize].color
    }

    /// Copies an existing tree into the arena, optionally recolouring it.
    pub fn graft(&mut self, tree: &PlaneTree, recolor: Option<Option<Color>>) -> u32 {
        let mut built = vec![0u32; tree.node_count()];
        for i in tree.postorder() {
            let n = tree.node(i);
            let c = recolor.unwrap_or(n.color);
            built[i] = match tree.children(i) {
                None => self.leaf(n.length, c),
                Some((l, r)) => self.join(n.length, c, built[l], built[r]),
            };
        }
        built[0]
    }

    pub fn finish(&self, root: u32) -> PlaneTree {
        self.finish_with_order(root).0
    }

    /// Like [`finish`](Self::finish), also returning the arena handle of
    /// each preorder position.
    pub fn finish_with_order(&self, root: u32) -> (PlaneTree, Vec<u32>) {
        let mut out: Vec<Node> = Vec::new();
        let mut order: Vec<u32> = Vec::new();
        let mut stack = vec![(root, u32::MAX)];
        while let Some((v, parent)) = stack.pop() {
            let idx = out.len() as u32;
            if parent != u32::MAX {
                out[parent as usize].right = idx;
            }
            let raw = self.raw[v as usize];
            order.push(v);
            out.push(Node {
                length: raw.length,
                color: raw.color,
                right: 0,
            });
            if let Some((l, r)) = raw.children {
                stack.push((r, idx));
                stack.push((l, u32::MAX));
            }
        }
        (PlaneTree { nodes: out }, order)
    }

    pub fn clear(&mut self) {
        self.raw.clear();
    }
}
