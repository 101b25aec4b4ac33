#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpType {
    Xfx,
    Xfy,
    Yfx,
    Fy,
    Fx,
}

#[derive(Clone, Copy, Debug)]
pub struct OpDef {
    pub priority: u32,
    pub kind: OpType,
}

impl OpDef {
    /// Maximum priorities of the (left, right) operands.
    pub fn arg_max(&self) -> (u32, u32) {
        let p = self.priority;
        match self.kind {
            OpType::Xfx => (p - 1, p - 1),
            OpType::Xfy => (p - 1, p),
            OpType::Yfx => (p, p - 1),
            OpType::Fy => (0, p),
            OpType::Fx => (0, p - 1),
        }
    }
}

const INFIX: &[(&str, u32, OpType)] = &[
    (":-", 1200, OpType::Xfx),
    ("-->", 1200, OpType::Xfx),
    (";", 1100, OpType::Xfy),
    ("|", 1100, OpType::Xfy),
    ("->", 1050, OpType::Xfy),
    ("*->", 1050, OpType::Xfy),
    (",", 1000, OpType::Xfy),
    ("=", 700, OpType::Xfx),
    ("\\=", 700, OpType::Xfx),
    ("==", 700, OpType::Xfx),
    ("\\==", 700, OpType::Xfx),
    ("@<", 700, OpType::Xfx),
    ("@>", 700, OpType::Xfx),
    ("@=<", 700, OpType::Xfx),
    ("@>=", 700, OpType::Xfx),
    ("=..", 700, OpType::Xfx),
    ("is", 700, OpType::Xfx),
    ("=:=", 700, OpType::Xfx),
    ("=\\=", 700, OpType::Xfx),
    ("<", 700, OpType::Xfx),
    (">", 700, OpType::Xfx),
    ("=<", 700, OpType::Xfx),
    (">=", 700, OpType::Xfx),
    ("=@=", 700, OpType::Xfx),
    ("\\=@=", 700, OpType::Xfx),
    ("as", 700, OpType::Xfx),
    (":", 200, OpType::Xfy),
    ("+", 500, OpType::Yfx),
    ("-", 500, OpType::Yfx),
    ("/\\", 500, OpType::Yfx),
    ("\\/", 500, OpType::Yfx),
    ("xor", 500, OpType::Yfx),
    ("*", 400, OpType::Yfx),
    ("/", 400, OpType::Yfx),
    ("//", 400, OpType::Yfx),
    ("mod", 400, OpType::Yfx),
    ("rem", 400, OpType::Yfx),
    ("div", 400, OpType::Yfx),
    ("<<", 400, OpType::Yfx),
    (">>", 400, OpType::Yfx),
    ("**", 200, OpType::Xfx),
    ("^", 200, OpType::Xfy),
];

const PREFIX: &[(&str, u32, OpType)] = &[
    (":-", 1200, OpType::Fx),
    ("?-", 1200, OpType::Fx),
    ("dynamic", 1150, OpType::Fx),
    ("discontiguous", 1150, OpType::Fx),
    ("initialization", 1150, OpType::Fx),
    ("module_transparent", 1150, OpType::Fx),
    ("multifile", 1150, OpType::Fx),
    ("public", 1150, OpType::Fx),
    ("table", 1150, OpType::Fx),
    ("\\+", 900, OpType::Fy),
    ("-", 200, OpType::Fy),
    ("+", 200, OpType::Fy),
    ("\\", 200, OpType::Fy),
];

pub fn infix(name: &str) -> Option<OpDef> {
    INFIX.iter().find(|(n, _, _)| *n == name).map(|&(_, priority, kind)| OpDef { priority, kind })
}

pub fn prefix(name: &str) -> Option<OpDef> {
    PREFIX.iter().find(|(n, _, _)| *n == name).map(|&(_, priority, kind)| OpDef { priority, kind })
}

pub fn is_op(name: &str) -> bool {
    infix(name).is_some() || prefix(name).is_some()
}
