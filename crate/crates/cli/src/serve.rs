//! TCP host for live sessions: one thread per connection, ~60 Hz ticks.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, TryRecvError};
use std::thread;
use std::time::{Duration, Instant};

use gripscribe::config::ProjectConfig;
use gripscribe::session::{handshake, Hello, Outbound, Recorder, SessionState};

const TICK: Duration = Duration::from_millis(16);

pub fn serve(cfg: &ProjectConfig, port: u16, record: bool) -> io::Result<()> {
    // Fail before accepting anything if the configuration cannot start a session.
    SessionState::new(cfg).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    if record {
        std::fs::create_dir_all(&cfg.output)?;
    }
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    for (n, stream) in listener.incoming().enumerate() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                eprintln!("accept failed: {e}");
                continue;
            }
        };
        let cfg = cfg.clone();
        thread::spawn(move || {
            let rec = record.then(|| cfg.output.join(format!("session-{n}.ndjson")));
            if let Err(e) = connection(&cfg, stream, rec) {
                eprintln!("session {n}: {e}");
            }
        });
    }
    Ok(())
}

fn connection(cfg: &ProjectConfig, stream: TcpStream, record: Option<std::path::PathBuf>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut out = BufWriter::new(stream);

    let mut first = String::new();
    reader.read_line(&mut first)?;
    if let Err(e) = handshake(&first) {
        writeln!(out, "{}", Outbound::Error(e).to_line())?;
        return out.flush();
    }
    writeln!(out, "{}", serde_json::to_string(&Hello::current()).unwrap())?;
    out.flush()?;

    let mut recorder = match record {
        Some(p) => {
            let mut r = Recorder::new(BufWriter::new(File::create(p)?));
            r.inbound(&first)?;
            Some(r)
        }
        None => None,
    };
    let mut state = SessionState::new(cfg).map_err(|e| io::Error::other(e.to_string()))?;

    let (tx, rx) = mpsc::channel::<String>();
    thread::spawn(move || {
        for line in reader.lines().map_while(Result::ok) {
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let mut last = Instant::now();
    let mut next = last + TICK;
    loop {
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        }
        next += TICK;

        let mut hung_up = false;
        loop {
            match rx.try_recv() {
                Ok(line) => {
                    if let Some(r) = recorder.as_mut() {
                        r.inbound(&line)?;
                    }
                    if let Some(e) = state.accept_line(&line) {
                        writeln!(out, "{}", Outbound::Error(e).to_line())?;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    hung_up = true;
                    break;
                }
            }
        }

        let now = Instant::now();
        let mut wall = (now - last).as_secs_f64();
        last = now;
        if let Some(r) = recorder.as_mut() {
            wall = r.tick(wall)?;
        }
        for frame in state.tick(wall) {
            writeln!(out, "{}", frame.to_line())?;
        }
        out.flush()?;
        if hung_up || state.is_closed() {
            break;
        }
    }
    if let Some(r) = recorder {
        r.into_inner().flush()?;
    }
    Ok(())
}
