use serde::{Deserialize, Serialize};

use super::{Metadata, TestCase};

/// The loaded test tree. Suites keep their children in registration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchyNode {
    Suite {
        description: String,
        #[serde(default)]
        metadata: Metadata,
        children: Vec<HierarchyNode>,
    },
    Test(TestCase),
}

impl HierarchyNode {
    pub fn description(&self) -> &str {
        match self {
            HierarchyNode::Suite { description, .. } => description,
            HierarchyNode::Test(test) => &test.description,
        }
    }

    /// Every test leaf in depth-first registration order.
    pub fn tests(&self) -> Vec<&TestCase> {
        let mut out = Vec::new();
        self.collect_tests(&mut out);
        out
    }

    fn collect_tests<'a>(&'a self, out: &mut Vec<&'a TestCase>) {
        match self {
            HierarchyNode::Test(test) => out.push(test),
            HierarchyNode::Suite { children, .. } => {
                for child in children {
                    child.collect_tests(out);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            HierarchyNode::Test(_) => 0,
            HierarchyNode::Suite { children, .. } => 1 + children.iter().map(HierarchyNode::depth).max().unwrap_or(0),
        }
    }

    /// Nested `"suite: …"` / `"test: …"` listing as a JSON tree, the shape a
    /// REPL would print for the loaded hierarchy.
    pub fn outline(&self) -> serde_json::Value {
        match self {
            HierarchyNode::Test(test) => format!("test: {}", test.description).into(),
            HierarchyNode::Suite { description, children, .. } => {
                let mut items = vec![serde_json::Value::from(format!("suite: {description}"))];
                items.extend(children.iter().map(HierarchyNode::outline));
                serde_json::Value::Array(items)
            }
        }
    }
}

pub fn forest_tests(forest: &[HierarchyNode]) -> Vec<&TestCase> {
    forest.iter().flat_map(HierarchyNode::tests).collect()
}
