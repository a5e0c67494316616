//! Policy checkpoints: a short key-value text header followed by every
//! parameter as little-endian `f32`, actor first, then critic. Within a
//! network parameters are stored layer by layer, weights (`[out][in]`
//! row-major) before biases.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ActorCritic, Mlp, NnError};

pub const CHECKPOINT_MAGIC: &str = "NAVLAB-POLICY v1";
const END_OF_HEADER: &str = "end";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_policy<W: Write>(mut w: W, policy: &ActorCritic<f32>) -> Result<(), NnError> {
    let (a, c) = (&policy.actor, &policy.critic);
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "actor.sizes={}", join(a.sizes()))?;
    writeln!(w, "actor.hidden={}", a.hidden_activation().name())?;
    writeln!(w, "actor.output={}", a.output_activation().name())?;
    writeln!(w, "critic.sizes={}", join(c.sizes()))?;
    writeln!(w, "critic.hidden={}", c.hidden_activation().name())?;
    writeln!(w, "critic.output={}", c.output_activation().name())?;
    writeln!(w, "log_std={}", join(&policy.head.log_std))?;
    writeln!(w, "dtype=f32le")?;
    writeln!(w, "param_count={}", a.num_params() + c.num_params())?;
    writeln!(w, "{END_OF_HEADER}")?;
    for p in a.params().iter().chain(c.params()) {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_policy(path: &Path, policy: &ActorCritic<f32>) -> Result<(), NnError> {
    write_policy(BufWriter::new(File::create(path)?), policy)
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn read_policy<R: Read>(r: R) -> Result<ActorCritic<f32>, NnError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad magic {:?}", line.trim_end())));
    }
    let mut fields = std::collections::HashMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(bad("truncated header"));
        }
        let l = line.trim_end();
        if l == END_OF_HEADER {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| bad(format!("malformed header line {l:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing header key {k}")));
    let sizes = |k: &str| -> Result<Vec<usize>, NnError> {
        get(k)?.split(',').map(|s| s.parse().map_err(|_| bad(format!("bad {k}")))).collect()
    };
    let act = |k: &str| -> Result<Activation, NnError> {
        let v = get(k)?;
        Activation::from_name(v).ok_or_else(|| bad(format!("unknown activation {v}")))
    };
    if get("dtype")? != "f32le" {
        return Err(bad("unsupported dtype"));
    }
    let log_std: Vec<f32> = get("log_std")?
        .split(',')
        .map(|s| s.parse().map_err(|_| bad("bad log_std")))
        .collect::<Result<_, _>>()?;

    let mut actor = Mlp::zeros(&sizes("actor.sizes")?, act("actor.hidden")?, act("actor.output")?);
    let mut critic = Mlp::zeros(&sizes("critic.sizes")?, act("critic.hidden")?, act("critic.output")?);
    let expected = actor.num_params() + critic.num_params();
    let declared: usize = get("param_count")?.parse().map_err(|_| bad("bad param_count"))?;
    if declared != expected {
        return Err(NnError::ShapeMismatch { expected, got: declared });
    }
    let mut buf = [0u8; 4];
    for p in actor.params_mut().iter_mut().chain(critic.params_mut()) {
        r.read_exact(&mut buf).map_err(|_| bad("truncated parameter block"))?;
        *p = f32::from_le_bytes(buf);
    }
    if r.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after parameter block"));
    }
    ActorCritic::from_parts(actor, critic, log_std)
}

pub fn load_policy(path: &Path) -> Result<ActorCritic<f32>, NnError> {
    read_policy(File::open(path)?)
}
