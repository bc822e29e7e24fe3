//! Exact cover by dancing links (Knuth's Algorithm X).
//!
//! Used to pick the neighbor-choice table of a doubling step, which must
//! split the `V2` side into disjoint subcubes. Column selection is
//! minimum-remaining-values with ties broken by the lowest item, and rows
//! are tried in insertion order, so the first cover found is deterministic.

const ROOT: usize = 0;

pub(crate) struct ExactCover {
    items: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    up: Vec<usize>,
    down: Vec<usize>,
    column: Vec<usize>,
    row: Vec<usize>,
    size: Vec<usize>,
    rows: usize,
}

pub(crate) enum CoverOutcome {
    /// Indices of the chosen options, in the order they were added.
    Found(Vec<usize>),
    Impossible,
    GaveUp { nodes: u64 },
}

impl ExactCover {
    pub(crate) fn new(items: usize) -> Self {
        // Node 0 is the root; nodes 1..=items are column headers.
        let header_count = items + 1;
        let mut cover = ExactCover {
            items,
            left: Vec::with_capacity(header_count),
            right: Vec::with_capacity(header_count),
            up: Vec::with_capacity(header_count),
            down: Vec::with_capacity(header_count),
            column: Vec::with_capacity(header_count),
            row: Vec::with_capacity(header_count),
            size: vec![0; header_count],
            rows: 0,
        };
        for i in 0..header_count {
            cover.left.push(if i == 0 { items } else { i - 1 });
            cover.right.push(if i == items { 0 } else { i + 1 });
            cover.up.push(i);
            cover.down.push(i);
            cover.column.push(i);
            cover.row.push(usize::MAX);
        }
        cover
    }

    /// Adds an option covering the given items (0-based, distinct).
    pub(crate) fn add_option(&mut self, option: &[usize]) {
        let row = self.rows;
        self.rows += 1;
        let mut first = None;
        for &item in option {
            debug_assert!(item < self.items);
            let col = item + 1;
            let node = self.left.len();
            let last = self.up[col];
            self.up.push(last);
            self.down.push(col);
            self.down[last] = node;
            self.up[col] = node;
            self.column.push(col);
            self.row.push(row);
            self.size[col] += 1;
            match first {
                None => {
                    self.left.push(node);
                    self.right.push(node);
                    first = Some(node);
                }
                Some(f) => {
                    let tail = self.left[f];
                    self.left.push(tail);
                    self.right.push(f);
                    self.right[tail] = node;
                    self.left[f] = node;
                }
            }
        }
    }

    fn cover(&mut self, col: usize) {
        let (l, r) = (self.left[col], self.right[col]);
        self.right[l] = r;
        self.left[r] = l;
        let mut i = self.down[col];
        while i != col {
            let mut j = self.right[i];
            while j != i {
                let (u, d) = (self.up[j], self.down[j]);
                self.down[u] = d;
                self.up[d] = u;
                self.size[self.column[j]] -= 1;
                j = self.right[j];
            }
            i = self.down[i];
        }
    }

    fn uncover(&mut self, col: usize) {
        let mut i = self.up[col];
        while i != col {
            let mut j = self.left[i];
            while j != i {
                self.size[self.column[j]] += 1;
                let (u, d) = (self.up[j], self.down[j]);
                self.down[u] = j;
                self.up[d] = j;
                j = self.left[j];
            }
            i = self.up[i];
        }
        let (l, r) = (self.left[col], self.right[col]);
        self.right[l] = col;
        self.left[r] = col;
    }

    fn choose_column(&self) -> Option<usize> {
        let mut best = None;
        let mut best_size = usize::MAX;
        let mut c = self.right[ROOT];
        while c != ROOT {
            if self.size[c] < best_size {
                best_size = self.size[c];
                best = Some(c);
                if best_size == 0 {
                    break;
                }
            }
            c = self.right[c];
        }
        best
    }

    fn cover_row(&mut self, node: usize) {
        let mut j = self.right[node];
        while j != node {
            self.cover(self.column[j]);
            j = self.right[j];
        }
    }

    fn uncover_row(&mut self, node: usize) {
        let mut j = self.left[node];
        while j != node {
            self.uncover(self.column[j]);
            j = self.left[j];
        }
    }

    /// Finds the first exact cover, visiting at most `max_nodes` search nodes.
    pub(crate) fn solve(mut self, max_nodes: u64) -> CoverOutcome {
        // Each stack entry is the row node currently chosen for a column.
        let mut stack: Vec<usize> = Vec::new();
        let mut nodes = 0u64;
        'descend: loop {
            nodes += 1;
            if nodes > max_nodes {
                return CoverOutcome::GaveUp { nodes };
            }
            let col = match self.choose_column() {
                None => {
                    let mut rows: Vec<usize> = stack.iter().map(|&r| self.row[r]).collect();
                    rows.sort_unstable();
                    return CoverOutcome::Found(rows);
                }
                Some(c) => c,
            };
            self.cover(col);
            let first = self.down[col];
            if first != col {
                self.cover_row(first);
                stack.push(first);
                continue 'descend;
            }
            self.uncover(col);
            // Backtrack until some chosen row has a successor.
            loop {
                let Some(node) = stack.pop() else {
                    return CoverOutcome::Impossible;
                };
                self.uncover_row(node);
                let col = self.column[node];
                let next = self.down[node];
                if next != col {
                    self.cover_row(next);
                    stack.push(next);
                    continue 'descend;
                }
                self.uncover(col);
            }
        }
    }
}
