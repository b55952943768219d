//! Loopback shard serving.
//!
//! Request: `count: u32` then `count` shard indices (`u32`, big-endian).
//! A count of `u32::MAX` stops the server. Response, once per index:
//! `index: u32 ‖ len: u32 ‖ shard ‖ proof_len: u32 ‖ proof`.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::HarnessError;
use crate::merkle::MerkleProof;

const CHUNK: usize = 64 * 1024;
const STOP: u32 = u32::MAX;

/// Paces a byte stream to a fixed rate.
#[derive(Debug)]
pub struct Throttle {
    rate: u64,
    start: Instant,
    sent: u64,
}

impl Throttle {
    /// `rate` in bytes per second; 0 means unlimited.
    pub fn new(rate: u64) -> Throttle {
        Throttle { rate, start: Instant::now(), sent: 0 }
    }

    /// Accounts for `n` bytes, sleeping until they are due.
    pub fn pace(&mut self, n: usize) {
        self.sent += n as u64;
        if self.rate == 0 {
            return;
        }
        let due = Duration::from_secs_f64(self.sent as f64 / self.rate as f64);
        let elapsed = self.start.elapsed();
        if due > elapsed {
            thread::sleep(due - elapsed);
        }
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }
}

fn write_paced<W: Write>(w: &mut W, buf: &[u8], throttle: &mut Throttle) -> std::io::Result<()> {
    for chunk in buf.chunks(CHUNK) {
        w.write_all(chunk)?;
        throttle.pace(chunk.len());
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// One provider's shard store behind a listening socket.
#[derive(Debug)]
pub struct ProviderServer {
    addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl ProviderServer {
    /// Serves `shards[i]` with `proofs[i]` to every connection, one at a time.
    pub fn spawn(
        shards: Arc<Vec<Vec<u8>>>,
        proofs: Arc<Vec<Vec<u8>>>,
        bandwidth: u64,
    ) -> Result<ProviderServer, HarnessError> {
        if shards.len() != proofs.len() {
            return Err(HarnessError::Protocol("shard and proof counts differ".into()));
        }
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                // A broken connection only ends that client's session.
                if let Ok(true) = serve(stream, &shards, &proofs, bandwidth) {
                    break;
                }
            }
        });
        Ok(ProviderServer { addr, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(handle) = self.handle.take() {
            if let Ok(mut s) = TcpStream::connect(self.addr) {
                let _ = s.write_all(&STOP.to_be_bytes());
            }
            let _ = handle.join();
        }
    }
}

impl Drop for ProviderServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Handles one connection; `Ok(true)` means stop.
fn serve(stream: TcpStream, shards: &[Vec<u8>], proofs: &[Vec<u8>], bandwidth: u64) -> Result<bool, HarnessError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let count = read_u32(&mut reader)?;
    if count == STOP {
        return Ok(true);
    }
    let mut indices = Vec::with_capacity(count as usize);
    for _ in 0..count {
        indices.push(read_u32(&mut reader)? as usize);
    }
    let mut w = BufWriter::with_capacity(CHUNK, stream);
    let mut throttle = Throttle::new(bandwidth);
    for i in indices {
        let (shard, proof) = match (shards.get(i), proofs.get(i)) {
            (Some(s), Some(p)) => (s, p),
            _ => return Err(HarnessError::Protocol(format!("no shard {i}"))),
        };
        let mut head = Vec::with_capacity(8);
        head.extend_from_slice(&(i as u32).to_be_bytes());
        head.extend_from_slice(&(shard.len() as u32).to_be_bytes());
        write_paced(&mut w, &head, &mut throttle)?;
        write_paced(&mut w, shard, &mut throttle)?;
        write_paced(&mut w, &(proof.len() as u32).to_be_bytes(), &mut throttle)?;
        write_paced(&mut w, proof, &mut throttle)?;
    }
    w.flush()?;
    w.get_ref().shutdown(Shutdown::Write)?;
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardFrame {
    pub index: usize,
    pub shard: Vec<u8>,
    pub proof: MerkleProof,
}

/// Requests `indices` from the server at `addr` and reads every frame back.
pub fn fetch(addr: SocketAddr, indices: &[usize]) -> Result<Vec<ShardFrame>, HarnessError> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let mut req = Vec::with_capacity(4 + 4 * indices.len());
    req.extend_from_slice(&(indices.len() as u32).to_be_bytes());
    for &i in indices {
        let i = u32::try_from(i)
            .ok()
            .filter(|&i| i != STOP)
            .ok_or_else(|| HarnessError::Protocol(format!("index {i} too large")))?;
        req.extend_from_slice(&i.to_be_bytes());
    }
    (&stream).write_all(&req)?;
    let mut r = BufReader::with_capacity(CHUNK, stream);
    let mut out = Vec::with_capacity(indices.len());
    for &want in indices {
        let index = read_u32(&mut r)? as usize;
        if index != want {
            return Err(HarnessError::Protocol(format!("expected shard {want}, got {index}")));
        }
        let mut shard = vec![0u8; read_u32(&mut r)? as usize];
        r.read_exact(&mut shard)?;
        let mut proof = vec![0u8; read_u32(&mut r)? as usize];
        r.read_exact(&mut proof)?;
        out.push(ShardFrame { index, shard, proof: MerkleProof::from_bytes(&proof)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::{mproof, mtree, mvrfy};

    type Store = (Arc<Vec<Vec<u8>>>, Arc<Vec<Vec<u8>>>, crate::merkle::Digest);

    fn store(n: usize, len: usize) -> Store {
        let shards: Vec<Vec<u8>> = (0..n).map(|i| vec![i as u8; len]).collect();
        let tree = mtree(&shards).unwrap();
        let proofs = (0..n).map(|i| mproof(&tree, i).unwrap().to_bytes()).collect();
        (Arc::new(shards), Arc::new(proofs), tree.root())
    }

    #[test]
    fn serves_requested_frames() {
        let (shards, proofs, root) = store(5, 1000);
        let server = ProviderServer::spawn(shards.clone(), proofs, 0).unwrap();
        let frames = fetch(server.addr(), &[4, 0, 2]).unwrap();
        assert_eq!(frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![4, 0, 2]);
        for f in &frames {
            assert_eq!(f.shard, shards[f.index]);
            assert!(mvrfy(f.index, &root, &f.shard, &f.proof));
        }
        // The server keeps accepting until stopped.
        assert_eq!(fetch(server.addr(), &[1]).unwrap()[0].shard, shards[1]);
        server.shutdown();
    }

    #[test]
    fn unknown_index_closes_connection() {
        let (shards, proofs, _) = store(2, 10);
        let server = ProviderServer::spawn(shards, proofs, 0).unwrap();
        assert!(fetch(server.addr(), &[9]).is_err());
        assert!(fetch(server.addr(), &[1]).is_ok());
    }

    #[test]
    fn throttle_limits_rate() {
        let (shards, proofs, _) = store(4, 64 * 1024);
        // 256 KiB at 1 MiB/s takes about a quarter second.
        let server = ProviderServer::spawn(shards, proofs, 1 << 20).unwrap();
        let t = Instant::now();
        fetch(server.addr(), &[0, 1, 2, 3]).unwrap();
        let secs = t.elapsed().as_secs_f64();
        assert!(secs > 0.2, "{secs}");
    }

    #[test]
    fn throttle_accounting() {
        let mut t = Throttle::new(0);
        t.pace(10);
        t.pace(5);
        assert_eq!(t.sent(), 15);
    }
}
