use std::io::Write;

use super::StepInfo;

/// Writes an execution trace as CSV: `cycle,pc,mnemonic,rd,value`.
/// `rd` and `value` are empty for instructions without a destination.
pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        out.write_record(["cycle", "pc", "mnemonic", "rd", "value"])?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, step: &StepInfo) -> csv::Result<()> {
        let (rd, value) = match step.rd {
            Some((r, v)) => (r.abi_name().to_string(), format!("{v:#010x}")),
            None => (String::new(), String::new()),
        };
        self.out.write_record([
            step.cycle.to_string(),
            format!("{:#010x}", step.pc),
            step.op.name().to_string(),
            rd,
            value,
        ])
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::emulator::{load, run_observed, CostModel, FaultConfig};

    #[test]
    fn trace_rows() {
        let p = parse_program("main:\n li a0, 3\n sw a0, -4(sp)\n li a7, 93\n ecall").unwrap();
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        run_observed(load(&p, "main").unwrap(), &FaultConfig::healthy(), &CostModel::default(), 100, |s, _| {
            w.record(s).unwrap()
        });
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "cycle,pc,mnemonic,rd,value");
        assert_eq!(lines[1], "0,0x00001000,addi,a0,0x00000003");
        assert_eq!(lines[2], "1,0x00001004,sw,,");
        assert_eq!(lines[3], "3,0x00001008,addi,a7,0x0000005d");
        assert_eq!(lines.len(), 5);
    }
}
