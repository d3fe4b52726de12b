//! Prototype serialization: CSV (`label,x1..xn`) and the binary container.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{PrototypeError, PrototypeSet, Result};
use crate::format::{Decoder, Encoder, FormatError};
use crate::geometry::{Curvature, Space};

pub const MAGIC: &[u8; 8] = b"HPNPROTO";
pub const VERSION: u32 = 1;

pub(crate) fn encode_space(e: &mut Encoder, space: Space) {
    match space {
        Space::Poincare(c) => e.u8(0).f64(c.value()),
        Space::Euclidean => e.u8(1).f64(0.0),
    };
}

pub(crate) fn decode_space(d: &mut Decoder) -> std::result::Result<Space, FormatError> {
    let tag = d.u8()?;
    let c = d.f64()?;
    match tag {
        0 => Curvature::new(c)
            .map(Space::Poincare)
            .map_err(|e| FormatError::Invalid(e.to_string())),
        1 => Ok(Space::Euclidean),
        t => Err(FormatError::Invalid(format!("unknown space tag {t}"))),
    }
}

impl PrototypeSet {
    pub(crate) fn encode_into(&self, e: &mut Encoder) {
        encode_space(e, self.space);
        e.u32(self.num_classes() as u32).u32(self.dim() as u32);
        e.strs(&self.labels);
        e.f64s(self.points.as_slice().expect("standard layout"));
    }

    pub(crate) fn decode_from(d: &mut Decoder) -> Result<Self> {
        let space = decode_space(d)?;
        let k = d.u32()? as usize;
        let n = d.u32()? as usize;
        let labels = d.strs()?;
        let data = d.f64s(k.saturating_mul(n))?;
        let points = Array2::from_shape_vec((k, n), data).map_err(|e| FormatError::Invalid(e.to_string()))?;
        PrototypeSet::new(points, labels, space)
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut e = Encoder::new();
        self.encode_into(&mut e);
        e.finish(w, MAGIC, VERSION)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (mut d, _) = Decoder::open(r, MAGIC, "prototype set", VERSION)?;
        let p = Self::decode_from(&mut d)?;
        d.done()?;
        Ok(p)
    }

    /// One prototype per row with the class label first.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for (k, l) in self.labels.iter().enumerate() {
            let mut row = vec![l.clone()];
            row.extend(self.point(k).iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()
    }

    /// Reads the CSV form; the space is not stored in the file.
    pub fn read_csv<R: Read>(r: R, space: Space) -> Result<Self> {
        let err = |e: csv::Error| PrototypeError::Csv(e.to_string());
        let mut rdr = csv::Reader::from_reader(r);
        let n = rdr.headers().map_err(err)?.len().saturating_sub(1);
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(err)?;
            if rec.len() != n + 1 {
                return Err(PrototypeError::Csv(format!("line {}: expected {} fields", i + 2, n + 1)));
            }
            labels.push(rec[0].to_string());
            for f in rec.iter().skip(1) {
                data.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| PrototypeError::Csv(format!("line {}: bad number `{f}`", i + 2)))?,
                );
            }
        }
        let points = Array2::from_shape_vec((labels.len(), n), data).map_err(|e| PrototypeError::Csv(e.to_string()))?;
        Self::new(points, labels, space)
    }
}
