use serde::{Deserialize, Serialize};

use super::ProfileError;

pub const ROOT_NAME: &str = "<root>";

/// One frame of an aggregated call tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallTreeNode {
    pub fn_name: String,
    #[serde(default)]
    pub children: Vec<CallTreeNode>,
    #[serde(default)]
    pub self_cycles: u64,
    /// Subtree cycles as a percentage of the binary total.
    #[serde(default)]
    pub inclusive_pct: f64,
    #[serde(default)]
    pub shared: bool,
}

impl CallTreeNode {
    pub fn new(fn_name: impl Into<String>) -> Self {
        Self {
            fn_name: fn_name.into(),
            children: Vec::new(),
            self_cycles: 0,
            inclusive_pct: 0.0,
            shared: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn inclusive_cycles(&self) -> u64 {
        self.self_cycles
            + self
                .children
                .iter()
                .map(CallTreeNode::inclusive_cycles)
                .sum::<u64>()
    }

    /// Recomputes `inclusive_pct` for every node from cycle counts. A tree
    /// with no cycles gets 0 everywhere.
    pub fn annotate(&mut self) {
        let total = self.inclusive_cycles();
        self.annotate_with_total(total);
    }

    fn annotate_with_total(&mut self, total: u64) -> u64 {
        let mut cycles = self.self_cycles;
        for c in &mut self.children {
            cycles += c.annotate_with_total(total);
        }
        self.inclusive_pct = if total == 0 {
            0.0
        } else {
            cycles as f64 * 100.0 / total as f64
        };
        cycles
    }

    pub fn child(&self, name: &str) -> Option<&CallTreeNode> {
        self.children.iter().find(|c| c.fn_name == name)
    }

    fn child_mut_or_insert(&mut self, name: &str) -> &mut CallTreeNode {
        let idx = match self.children.iter().position(|c| c.fn_name == name) {
            Some(i) => i,
            None => {
                self.children.push(CallTreeNode::new(name));
                self.children.len() - 1
            }
        };
        &mut self.children[idx]
    }

    /// Depth-first pre-order walk.
    pub fn walk(&self, f: &mut impl FnMut(&CallTreeNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut CallTreeNode)) {
        f(self);
        for c in &mut self.children {
            c.walk_mut(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

/// Parses collapsed stacks (`a;b;c 42` per line) into a tree under a
/// synthetic `<root>`. Counts go to the last frame of each stack; blank
/// lines are ignored.
pub fn parse_folded_stacks(text: &str) -> Result<CallTreeNode, ProfileError> {
    let mut root = CallTreeNode::new(ROOT_NAME);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: &str| ProfileError::MalformedLine {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let (stack, count) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| malformed("missing sample count"))?;
        let count: u64 = count
            .parse()
            .map_err(|_| malformed("sample count is not a non-negative integer"))?;
        if count == 0 {
            return Err(malformed("sample count must be positive"));
        }
        let stack = stack.trim_end();
        if stack.is_empty() {
            return Err(malformed("empty stack"));
        }
        let mut node = &mut root;
        for frame in stack.split(';') {
            if frame.is_empty() {
                return Err(malformed("empty frame"));
            }
            node = node.child_mut_or_insert(frame);
        }
        node.self_cycles += count;
    }
    root.annotate();
    Ok(root)
}

#[derive(Deserialize)]
struct JsonNode {
    fn_name: String,
    #[serde(default)]
    self_cycles: u64,
    #[serde(default)]
    shared: Option<bool>,
    #[serde(default)]
    children: Vec<JsonNode>,
}

impl From<JsonNode> for CallTreeNode {
    fn from(n: JsonNode) -> Self {
        CallTreeNode {
            fn_name: n.fn_name,
            children: n.children.into_iter().map(Into::into).collect(),
            self_cycles: n.self_cycles,
            inclusive_pct: 0.0,
            shared: n.shared.unwrap_or(false),
        }
    }
}

/// Parses the `{fn_name, self_cycles, shared?, children[]}` form. A top
/// level that is not already named `<root>` is wrapped in one.
pub fn parse_call_tree_json(text: &str) -> Result<CallTreeNode, ProfileError> {
    let node: CallTreeNode = serde_json::from_str::<JsonNode>(text)?.into();
    let mut root = if node.fn_name == ROOT_NAME {
        node
    } else {
        let mut r = CallTreeNode::new(ROOT_NAME);
        r.children.push(node);
        r
    };
    root.annotate();
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stack() {
        let t = parse_folded_stacks("main;f 10").unwrap();
        assert_eq!(t.fn_name, ROOT_NAME);
        let f = t.child("main").unwrap().child("f").unwrap();
        assert_eq!(f.inclusive_pct, 100.0);
        assert_eq!(f.self_cycles, 10);
        assert_eq!(t.inclusive_pct, 100.0);
    }

    #[test]
    fn two_stacks() {
        let t = parse_folded_stacks("main;f 75\nmain;g 25").unwrap();
        let main = t.child("main").unwrap();
        assert_eq!(main.inclusive_pct, 100.0);
        assert_eq!(main.child("f").unwrap().inclusive_pct, 75.0);
        assert_eq!(main.child("g").unwrap().inclusive_pct, 25.0);
    }

    #[test]
    fn shared_prefixes_build_expected_shape() {
        // Drawn by hand:
        //   <root> 100
        //   ├── main 80
        //   │   ├── a 60
        //   │   │   ├── b 40
        //   │   │   └── c 20
        //   │   └── d 20
        //   └── other 20
        let text = "main;a;b 40\nmain;a;c 20\nmain;d 20\nother 20\n";
        let t = parse_folded_stacks(text).unwrap();
        assert_eq!(t.children.len(), 2);
        let main = t.child("main").unwrap();
        assert_eq!(main.inclusive_pct, 80.0);
        assert_eq!(main.children.len(), 2);
        let a = main.child("a").unwrap();
        assert_eq!(a.inclusive_pct, 60.0);
        assert_eq!(a.self_cycles, 0);
        assert_eq!(a.child("b").unwrap().inclusive_pct, 40.0);
        assert_eq!(a.child("c").unwrap().inclusive_pct, 20.0);
        assert_eq!(main.child("d").unwrap().inclusive_pct, 20.0);
        assert_eq!(t.child("other").unwrap().inclusive_pct, 20.0);
        assert_eq!(t.node_count(), 7);
    }

    #[test]
    fn interior_frames_accumulate_self_cycles() {
        let t = parse_folded_stacks("main 30\nmain;f 70").unwrap();
        let main = t.child("main").unwrap();
        assert_eq!(main.self_cycles, 30);
        assert_eq!(main.inclusive_pct, 100.0);
    }

    #[test]
    fn malformed_lines() {
        for bad in ["main;f", "main;f ten", "main;f 0", "main;;f 3", "main;f -2"] {
            let err = parse_folded_stacks(&format!("ok 1\n{bad}")).unwrap_err();
            assert!(
                matches!(err, ProfileError::MalformedLine { line: 2, .. }),
                "{bad}: {err}"
            );
        }
    }

    #[test]
    fn empty_profile() {
        let t = parse_folded_stacks("").unwrap();
        assert!(t.children.is_empty());
        assert_eq!(t.inclusive_pct, 0.0);
    }

    #[test]
    fn json_tree_is_wrapped_and_annotated() {
        let json = r#"{"fn_name":"main","self_cycles":10,"children":[
            {"fn_name":"f","self_cycles":30,"shared":true}]}"#;
        let t = parse_call_tree_json(json).unwrap();
        assert_eq!(t.fn_name, ROOT_NAME);
        let main = t.child("main").unwrap();
        assert_eq!(main.inclusive_pct, 100.0);
        let f = main.child("f").unwrap();
        assert!(f.shared);
        assert_eq!(f.inclusive_pct, 75.0);
    }
}
