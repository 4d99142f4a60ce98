use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::VerifyError;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub success: bool,
    pub timed_out: bool,
    pub stdout: String,
    pub stderr: String,
}

/// Runs `cmd` through `sh -c` in `dir`, killing it after `timeout`.
/// Output goes through temporary files so a chatty child cannot block on
/// a full pipe.
pub fn run_shell(cmd: &str, dir: &Path, timeout: Duration) -> Result<CommandResult, VerifyError> {
    let io = |e| VerifyError::Io(format!("running `{cmd}`"), e);
    let mut out = tempfile::tempfile().map_err(io)?;
    let mut err = tempfile::tempfile().map_err(io)?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(out.try_clone().map_err(io)?)
        .stderr(err.try_clone().map_err(io)?)
        .spawn()
        .map_err(io)?;
    let deadline = Instant::now() + timeout;
    let mut pause = Duration::from_millis(1);
    let status = loop {
        if let Some(s) = child.try_wait().map_err(io)? {
            break Some(s);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(50));
    };
    let read = |f: &mut std::fs::File| -> Result<String, VerifyError> {
        use std::io::{Read, Seek, SeekFrom};
        f.seek(SeekFrom::Start(0)).map_err(io)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf).map_err(io)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    };
    Ok(CommandResult {
        success: status.is_some_and(|s| s.success()),
        timed_out: status.is_none(),
        stdout: read(&mut out)?,
        stderr: read(&mut err)?,
    })
}
