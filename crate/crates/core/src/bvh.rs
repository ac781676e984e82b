//! BVH (Biovision Hierarchy) reading and writing.
//!
//! `End Site` blocks become zero-channel leaf joints named `<parent>_end` so
//! that end-effector offsets take part in forward kinematics. Joint kinds are
//! not stored in BVH; parsing assigns `EndEffector` to end sites, `Actuated`
//! to joints carrying rotation channels and `Fixed` to the rest. Binding a
//! [`SkeletonConfig`](crate::skeleton::SkeletonConfig) replaces them.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::motion::MotionClip;
use crate::skeleton::{ChannelKind, Joint, JointKind, Skeleton, SkeletonError};

/// Largest offset drift tolerated between files of one domain.
pub const OFFSET_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhError {
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("line {line}: frame row has {found} values, expected {expected}")]
    ChannelMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: malformed number {token:?}")]
    MalformedNumber { line: usize, token: String },
    #[error("line {line}: unbalanced braces")]
    UnbalancedBraces { line: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("declared {declared} frames, found {found}")]
    FrameCountMismatch { declared: usize, found: usize },
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("{file}: skeleton differs at joint {joint}")]
    SkeletonMismatch { file: String, joint: String },
    #[error("{file}: {source}")]
    InFile { file: String, source: Box<BvhError> },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Row-major frame values; one column per declared channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameTable {
    columns: usize,
    frames: usize,
    data: Vec<f64>,
}

impl FrameTable {
    pub fn new(columns: usize, frames: usize, data: Vec<f64>) -> Self {
        assert_eq!(columns * frames, data.len(), "frame table size");
        Self {
            columns,
            frames,
            data,
        }
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.columns..(frame + 1) * self.columns]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvhDocument {
    pub skeleton: Skeleton,
    pub frames: FrameTable,
    /// Seconds per frame.
    pub frame_time: f64,
}

impl BvhDocument {
    pub fn new(skeleton: Skeleton, frames: FrameTable, frame_time: f64) -> Self {
        debug_assert_eq!(skeleton.channel_count(), frames.columns());
        Self {
            skeleton,
            frames,
            frame_time,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.frames()
    }

    /// Largest absolute difference over offsets, frame values and frame
    /// time. `None` when the two documents differ structurally.
    pub fn max_numeric_difference(&self, other: &BvhDocument) -> Option<f64> {
        if self.skeleton.topology_difference(&other.skeleton).is_some()
            || self.frames.frames() != other.frames.frames()
            || self.frames.columns() != other.frames.columns()
        {
            return None;
        }
        let frames = self
            .frames
            .values()
            .iter()
            .zip(other.frames.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Some(
            self.skeleton
                .max_offset_difference(&other.skeleton)
                .max(frames)
                .max((self.frame_time - other.frame_time).abs()),
        )
    }
}

struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&Token<'a>> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.toks.get(self.pos)
    }

    fn last_line(&self) -> usize {
        self.toks.last().map_or(1, |t| t.line)
    }

    fn expect(&mut self, word: &str) -> Result<usize, BvhError> {
        let eof = self.last_line();
        match self.next() {
            Some(t) if t.text == word => Ok(t.line),
            Some(t) => Err(BvhError::Syntax {
                line: t.line,
                message: format!("expected {word:?}, found {:?}", t.text),
            }),
            None => Err(BvhError::Syntax {
                line: eof,
                message: format!("expected {word:?}, found end of input"),
            }),
        }
    }

    fn name(&mut self) -> Result<String, BvhError> {
        let eof = self.last_line();
        match self.next() {
            Some(t) if t.text != "{" && t.text != "}" => Ok(t.text.to_string()),
            Some(t) => Err(BvhError::Syntax {
                line: t.line,
                message: "expected a joint name".into(),
            }),
            None => Err(BvhError::Syntax {
                line: eof,
                message: "expected a joint name".into(),
            }),
        }
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let eof = self.last_line();
        let t = self.next().ok_or(BvhError::Syntax {
            line: eof,
            message: "expected a number".into(),
        })?;
        parse_number(t.text, t.line)
    }

    fn open_brace(&mut self) -> Result<(), BvhError> {
        let eof = self.last_line();
        match self.next() {
            Some(t) if t.text == "{" => Ok(()),
            Some(t) => Err(BvhError::UnbalancedBraces { line: t.line }),
            None => Err(BvhError::UnbalancedBraces { line: eof }),
        }
    }
}

fn parse_number(text: &str, line: usize) -> Result<f64, BvhError> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(BvhError::MalformedNumber {
            line,
            token: text.to_string(),
        }),
    }
}

/// Parses raw bytes, rejecting anything that is not UTF-8.
pub fn parse_bvh_bytes(bytes: &[u8]) -> Result<BvhDocument, BvhError> {
    let text = std::str::from_utf8(bytes).map_err(|_| BvhError::Encoding)?;
    parse_bvh(text)
}

pub fn parse_bvh(text: &str) -> Result<BvhDocument, BvhError> {
    let lines: Vec<&str> = text.lines().collect();
    let hierarchy_line = lines
        .iter()
        .position(|l| l.split_whitespace().next() == Some("HIERARCHY"))
        .ok_or(BvhError::MissingSection("HIERARCHY"))?;
    let motion_line = lines
        .iter()
        .enumerate()
        .skip(hierarchy_line + 1)
        .find(|(_, l)| l.split_whitespace().next() == Some("MOTION"))
        .map(|(i, _)| i)
        .ok_or(BvhError::MissingSection("MOTION"))?;

    let mut toks = Tokens {
        toks: Vec::new(),
        pos: 0,
    };
    for (i, l) in lines
        .iter()
        .enumerate()
        .take(motion_line)
        .skip(hierarchy_line + 1)
    {
        toks.toks
            .extend(l.split_whitespace().map(|text| Token { text, line: i + 1 }));
    }
    let joints = parse_hierarchy(&mut toks, motion_line + 1)?;
    let skeleton = Skeleton::new(joints)?;

    let mut rest = lines
        .iter()
        .enumerate()
        .skip(motion_line + 1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, frames_line) = rest.next().ok_or(BvhError::Syntax {
        line: motion_line + 1,
        message: "expected \"Frames:\"".into(),
    })?;
    let declared = frames_line
        .strip_prefix("Frames:")
        .ok_or_else(|| BvhError::Syntax {
            line,
            message: "expected \"Frames:\"".into(),
        })?
        .trim();
    let declared: usize = declared.parse().map_err(|_| BvhError::MalformedNumber {
        line,
        token: declared.to_string(),
    })?;

    let (line, time_line) = rest.next().ok_or(BvhError::Syntax {
        line,
        message: "expected \"Frame Time:\"".into(),
    })?;
    let time_text = time_line
        .strip_prefix("Frame Time:")
        .ok_or_else(|| BvhError::Syntax {
            line,
            message: "expected \"Frame Time:\"".into(),
        })?
        .trim();
    let frame_time = parse_number(time_text, line)?;
    if frame_time <= 0.0 {
        return Err(BvhError::Syntax {
            line,
            message: "frame time must be positive".into(),
        });
    }

    let columns = skeleton.channel_count();
    let mut data = Vec::with_capacity(declared.saturating_mul(columns).min(1 << 24));
    let mut found = 0;
    if columns == 0 {
        found = declared;
    } else {
        for (line, row) in rest {
            let values: Vec<&str> = row.split_whitespace().collect();
            if values.len() != columns {
                return Err(BvhError::ChannelMismatch {
                    line,
                    expected: columns,
                    found: values.len(),
                });
            }
            for v in values {
                data.push(parse_number(v, line)?);
            }
            found += 1;
        }
    }
    if found != declared {
        return Err(BvhError::FrameCountMismatch { declared, found });
    }
    Ok(BvhDocument::new(
        skeleton,
        FrameTable::new(columns, found, data),
        frame_time,
    ))
}

fn parse_hierarchy(toks: &mut Tokens<'_>, motion_line: usize) -> Result<Vec<Joint>, BvhError> {
    toks.expect("ROOT")?;
    let name = toks.name()?;
    toks.open_brace()?;
    let mut joints = vec![new_joint(name, None)];
    // Indices of joints whose blocks are still open.
    let mut open = vec![0usize];
    let mut saw_offset = vec![false];

    while let Some(&top) = open.last() {
        let (text, line) = match toks.next() {
            Some(t) => (t.text, t.line),
            None => return Err(BvhError::UnbalancedBraces { line: motion_line }),
        };
        match text {
            "OFFSET" => {
                let offset = [toks.number()?, toks.number()?, toks.number()?];
                joints[top].offset = offset;
                saw_offset[top] = true;
            }
            "CHANNELS" => {
                let count_line = toks.peek().map_or(line, |t| t.line);
                let n = toks.number()?;
                if n < 0.0 || n.fract() != 0.0 || n > 6.0 {
                    return Err(BvhError::Syntax {
                        line: count_line,
                        message: format!("bad channel count {n}"),
                    });
                }
                let mut channels = Vec::with_capacity(n as usize);
                for _ in 0..n as usize {
                    let eof = toks.last_line();
                    let t = toks.next().ok_or(BvhError::Syntax {
                        line: eof,
                        message: "expected a channel".into(),
                    })?;
                    let c = ChannelKind::parse(t.text).ok_or_else(|| BvhError::Syntax {
                        line: t.line,
                        message: format!("unknown channel {:?}", t.text),
                    })?;
                    channels.push(c);
                }
                if channels.iter().any(|c| c.rotation_axis().is_some()) {
                    joints[top].kind = JointKind::Actuated;
                }
                joints[top].channels = channels;
            }
            "JOINT" => {
                let name = toks.name()?;
                toks.open_brace()?;
                joints.push(new_joint(name, Some(top)));
                open.push(joints.len() - 1);
                saw_offset.push(false);
            }
            "End" => {
                toks.expect("Site")?;
                toks.open_brace()?;
                toks.expect("OFFSET")?;
                let offset = [toks.number()?, toks.number()?, toks.number()?];
                let close = toks.last_line();
                match toks.next() {
                    Some(t) if t.text == "}" => {}
                    Some(t) => return Err(BvhError::UnbalancedBraces { line: t.line }),
                    None => return Err(BvhError::UnbalancedBraces { line: close }),
                }
                let mut name = format!("{}_end", joints[top].name);
                let mut k = 2;
                while joints.iter().any(|j| j.name == name) {
                    name = format!("{}_end{k}", joints[top].name);
                    k += 1;
                }
                joints.push(Joint {
                    offset,
                    kind: JointKind::EndEffector,
                    end_site: true,
                    ..new_joint(name, Some(top))
                });
                saw_offset.push(true);
            }
            "}" => {
                if !saw_offset[top] {
                    return Err(BvhError::Syntax {
                        line,
                        message: format!("joint {} has no OFFSET", joints[top].name),
                    });
                }
                open.pop();
            }
            "{" => return Err(BvhError::UnbalancedBraces { line }),
            other => {
                return Err(BvhError::Syntax {
                    line,
                    message: format!("unexpected token {other:?}"),
                });
            }
        }
    }
    if let Some(t) = toks.next() {
        return Err(if t.text == "}" {
            BvhError::UnbalancedBraces { line: t.line }
        } else {
            BvhError::Syntax {
                line: t.line,
                message: format!("unexpected token {:?} after root", t.text),
            }
        });
    }
    Ok(joints)
}

fn new_joint(name: String, parent: Option<usize>) -> Joint {
    Joint {
        name,
        parent,
        offset: [0.0; 3],
        channels: Vec::new(),
        kind: JointKind::Fixed,
        end_site: false,
    }
}

/// Serializes with two-space indentation; channel values are printed with
/// `precision` decimals, offsets and frame time at full round-trip precision.
pub fn write_bvh(doc: &BvhDocument, precision: usize) -> String {
    let sk = &doc.skeleton;
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, sk, sk.root_index(), 0);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", doc.frames.frames());
    let _ = writeln!(out, "Frame Time: {}", doc.frame_time);
    for f in 0..doc.frames.frames() {
        let row = doc.frames.row(f);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.precision$}");
        }
        out.push('\n');
    }
    out
}

fn write_joint(out: &mut String, sk: &Skeleton, index: usize, depth: usize) {
    let pad = "  ".repeat(depth);
    let j = sk.joint(index);
    let offset = format!("{} {} {}", j.offset[0], j.offset[1], j.offset[2]);
    if j.end_site {
        let _ = writeln!(
            out,
            "{pad}End Site\n{pad}{{\n{pad}  OFFSET {offset}\n{pad}}}"
        );
        return;
    }
    let keyword = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{keyword} {}\n{pad}{{", j.name);
    let _ = writeln!(out, "{pad}  OFFSET {offset}");
    let _ = write!(out, "{pad}  CHANNELS {}", j.channels.len());
    for c in &j.channels {
        out.push(' ');
        out.push_str(c.name());
    }
    out.push('\n');
    for c in sk.children(index) {
        write_joint(out, sk, c, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Clips loaded from one domain directory.
#[derive(Debug, Clone, Default)]
pub struct MotionSet {
    pub clips: Vec<MotionClip>,
    pub warnings: Vec<String>,
}

impl MotionSet {
    pub fn total_frames(&self) -> usize {
        self.clips.iter().map(|c| c.len()).sum()
    }
}

pub fn read_bvh_file(path: &Path) -> Result<BvhDocument, BvhError> {
    let file = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| BvhError::Io {
        path: file.clone(),
        message: e.to_string(),
    })?;
    parse_bvh_bytes(&bytes).map_err(|e| BvhError::InFile {
        file,
        source: Box::new(e),
    })
}

/// Sorted `*.bvh` paths in `dir`.
pub fn bvh_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, BvhError> {
    let io = |e: std::io::Error| BvhError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("bvh")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every BVH file in `dir` in filename order. Each file must share the
/// topology of `expected`; offsets may drift by at most
/// [`OFFSET_TOLERANCE`], which is reported as a warning. Clips carry the
/// kinds of `expected`.
pub fn load_motion_dir(dir: impl AsRef<Path>, expected: &Skeleton) -> Result<MotionSet, BvhError> {
    let mut set = MotionSet::default();
    for path in bvh_files(dir.as_ref())? {
        let file = path.display().to_string();
        let doc = read_bvh_file(&path)?;
        if let Some(joint) = expected.topology_difference(&doc.skeleton) {
            return Err(BvhError::SkeletonMismatch { file, joint });
        }
        let drift = expected.max_offset_difference(&doc.skeleton);
        if drift > OFFSET_TOLERANCE {
            let joint = expected
                .joints()
                .iter()
                .zip(doc.skeleton.joints())
                .find(|(a, b)| (0..3).any(|k| (a.offset[k] - b.offset[k]).abs() > OFFSET_TOLERANCE))
                .map(|(a, _)| a.name.clone())
                .unwrap_or_default();
            return Err(BvhError::SkeletonMismatch { file, joint });
        }
        if drift > 0.0 {
            let msg = format!("{file}: offsets differ from the domain skeleton by {drift:e}");
            log::warn!("{msg}");
            set.warnings.push(msg);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        set.clips.push(MotionClip::from_document(name, &doc));
    }
    Ok(set)
}
