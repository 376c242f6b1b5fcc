//! Binary model container.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic            4 bytes  "RLRN"
//! format version   u32
//! kind tag         u8       (ModelKind::tag)
//! dim              u32      weight dimension
//! arch tag         u8       0 feedforward, 1 recurrent, 2 parametric
//!   feedforward:   u32 layer count, u32 sizes..., u8 activation
//!   recurrent:     u32 gru input, u32 gru hidden,
//!                  u32 head layer count, u32 sizes..., u8 activation
//! logit clamp      f64
//! params           u64 count, f64 values
//! input norm       u32 count, f64 means, f64 stds
//! shared w0        u8 present flag, then dim f64 when present
//! per-animal w0    u32 count, then per animal: u32 id length, UTF-8 id, dim f64
//! fit config       u32 length, JSON
//! diagnostics      u32 length, JSON
//! checksum         32 bytes SHA-256 of everything above
//! ```

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{FitConfig, FitDiagnostics, FittedModel, InitialWeights, InputNorm, ModelKind, RuleNetwork};
use crate::inference::network::Arch;
use crate::nets::{Activation, Gru, Mlp};

pub const MAGIC: &[u8; 4] = b"RLRN";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.u32(b.len())?;
        self.0.extend_from_slice(b);
        Ok(())
    }
    fn sizes(&mut self, sizes: &[usize], activation: Activation) -> Result<()> {
        self.u32(sizes.len())?;
        for &s in sizes {
            self.u32(s)?;
        }
        self.u8(activation.tag());
        Ok(())
    }
}

pub fn encode_model(model: &FittedModel) -> Result<Vec<u8>> {
    let net = &model.network;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    w.u8(net.kind.tag());
    w.u32(net.dim)?;
    match &net.arch {
        Arch::Feedforward(mlp) => {
            w.u8(0);
            w.sizes(mlp.sizes(), mlp.activation())?;
        }
        Arch::Recurrent { gru, head } => {
            w.u8(1);
            w.u32(gru.input_dim())?;
            w.u32(gru.hidden_dim())?;
            w.sizes(head.sizes(), head.activation())?;
        }
        Arch::Parametric => w.u8(2),
    }
    w.f64(net.logit_clamp);
    w.0.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
    w.f64s(&net.params);
    w.u32(net.norm.mean.len())?;
    w.f64s(&net.norm.mean);
    w.f64s(&net.norm.std);
    match &model.w0.shared {
        Some(v) => {
            w.u8(1);
            w.f64s(v);
        }
        None => w.u8(0),
    }
    w.u32(model.w0.per_animal.len())?;
    for (id, v) in &model.w0.per_animal {
        w.bytes(id.as_bytes())?;
        w.f64s(v);
    }
    w.bytes(&serde_json::to_vec(&model.config)?)?;
    w.bytes(&serde_json::to_vec(&model.diagnostics)?)?;
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("unexpected end of model file at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("length {v} too large")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > self.buf.len() / 8 {
            return Err(Error::Format(format!("implausible array length {n}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }
    fn sizes(&mut self) -> Result<(Vec<usize>, Activation)> {
        let n = self.u32()?;
        if n < 2 || n > 64 {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let tag = self.u8()?;
        let act = Activation::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
        Ok((sizes, act))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<FittedModel> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format("model file checksum mismatch (truncated or corrupted)".into()));
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model format version {version}")));
    }
    let tag = r.u8()?;
    let kind = ModelKind::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown model kind tag {tag}")))?;
    let dim = r.u32()?;
    let arch = match r.u8()? {
        0 => {
            let (sizes, act) = r.sizes()?;
            Arch::Feedforward(Mlp::new(sizes, act))
        }
        1 => {
            let input = r.u32()?;
            let hidden = r.u32()?;
            let (sizes, act) = r.sizes()?;
            Arch::Recurrent {
                gru: Gru::new(input, hidden),
                head: Mlp::new(sizes, act),
            }
        }
        2 => Arch::Parametric,
        t => return Err(Error::Format(format!("unknown architecture tag {t}"))),
    };
    let logit_clamp = r.f64()?;
    let n = r.u64()?;
    let params = r.f64s(n)?;
    let expected = match &arch {
        Arch::Feedforward(m) => Some(m.num_params()),
        Arch::Recurrent { gru, head } => Some(gru.num_params() + head.num_params()),
        Arch::Parametric => None,
    };
    if expected.is_some_and(|e| e != params.len()) {
        return Err(Error::Format("parameter count does not match the architecture".into()));
    }
    let k = r.u32()?;
    let mean = r.f64s(k)?;
    let std = r.f64s(k)?;
    let shared = match r.u8()? {
        0 => None,
        1 => Some(r.f64s(dim)?),
        f => return Err(Error::Format(format!("bad shared-w0 flag {f}"))),
    };
    let count = r.u32()?;
    let mut w0 = InitialWeights {
        shared,
        ..InitialWeights::default()
    };
    for _ in 0..count {
        let id = std::str::from_utf8(r.bytes()?)
            .map_err(|_| Error::Format("animal id is not UTF-8".into()))?
            .to_string();
        let v = r.f64s(dim)?;
        w0.per_animal.insert(id, v);
    }
    let config: FitConfig = serde_json::from_slice(r.bytes()?)?;
    let diagnostics: FitDiagnostics = serde_json::from_slice(r.bytes()?)?;
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after model payload".into()));
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite parameters".into()));
    }
    Ok(FittedModel {
        network: RuleNetwork {
            kind,
            dim,
            arch,
            params,
            norm: InputNorm { mean, std },
            logit_clamp,
        },
        w0,
        config,
        diagnostics,
    })
}

pub fn save_model(path: &std::path::Path, model: &FittedModel) -> Result<String> {
    let bytes = encode_model(model)?;
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_model(path: &std::path::Path) -> Result<(FittedModel, String)> {
    let bytes = std::fs::read(path)?;
    Ok((decode_model(&bytes)?, sha256_hex(&bytes)))
}
