use std::fs::File;
use std::io::{self, Write};
use std::net::ToSocketAddrs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use eseds_core::cipher::{keygen, SecretKey};
use eseds_core::client::Client;
use eseds_core::coins::CoinSource;
use eseds_core::domain::{Domain, RangeQuery};
use eseds_core::store::{StoreMode, StoreState};
use eseds_core::transport::{Server, ServerHandle, Session, DEFAULT_PORT};

use crate::args::{AttackArgs, BenchArgs, Cli, Command, GameArgs, InitArgs, ServeArgs};
use crate::bench::{self, BenchConfig, BenchRow};
use crate::error::{CliError, Result};
use crate::game::{self, GameConfig};
use crate::keyfile::KeyFile;
use crate::lab::{self, AttackConfig};

const DEFAULT_DOMAIN_BITS: u32 = 32;
const DEFAULT_ATTACK_DOMAIN: u64 = 64;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Init(a) => init(cli, a, out),
        Command::Insert { values } => insert(cli, values, out),
        Command::Query { a, b } => query(cli, *a, *b, out),
        Command::Topk { k } => topk(cli, *k, out),
        Command::Bench(a) => run_bench(cli, a, out),
        Command::Attack(a) => attack(cli, a, out),
        Command::Game(a) => run_game(cli, a, out),
        Command::Serve(a) => serve(cli, a, out),
        Command::Rebalance { batch } => rebalance(cli, *batch, out),
    }
}

fn coins(cli: &Cli) -> CoinSource {
    cli.seed.map_or_else(CoinSource::from_entropy, CoinSource::seeded)
}

fn key_path(cli: &Cli) -> PathBuf {
    cli.key.clone().unwrap_or_else(|| {
        let mut p = cli.store.clone().into_os_string();
        p.push(".key");
        PathBuf::from(p)
    })
}

/// `--addr`, else `$ESEDS_ADDR` (via clap), else 127.0.0.1:`$ESEDS_PORT`.
pub fn resolve_addr(cli: &Cli) -> Result<String> {
    if let Some(a) = &cli.addr {
        return Ok(a.clone());
    }
    let port = match std::env::var("ESEDS_PORT") {
        Ok(p) => p
            .parse::<u16>()
            .map_err(|_| CliError::Usage(format!("ESEDS_PORT is not a port: {p}")))?,
        Err(_) => DEFAULT_PORT,
    };
    Ok(format!("127.0.0.1:{port}"))
}

fn csv_out(cli: &Cli, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let Some(path) = &cli.out else { return Ok(()) };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn load_store(path: &Path) -> Result<StoreState> {
    let mut f = File::open(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            CliError::Usage(format!("no store at {} (run `eseds init`)", path.display()))
        } else {
            e.into()
        }
    })?;
    Ok(StoreState::load(&mut f)?)
}

/// A session to the store plus the in-process server, if embedded.
struct Connection {
    session: Session,
    embedded: Option<Arc<Server>>,
}

impl Connection {
    fn open(cli: &Cli, coins: &mut CoinSource) -> Result<Self> {
        if cli.embedded {
            let store = load_store(&cli.store)?;
            let server = Arc::new(Server::new(store, coins.fork()).with_save_path(&cli.store));
            Ok(Self {
                session: Session::in_process(Arc::clone(&server)),
                embedded: Some(server),
            })
        } else {
            let addr = resolve_addr(cli)?;
            let resolved: Vec<_> = addr
                .to_socket_addrs()
                .map_err(|e| CliError::Usage(format!("bad address {addr}: {e}")))?
                .collect();
            Ok(Self {
                session: Session::connect(&resolved[..])?,
                embedded: None,
            })
        }
    }

    /// Persists the store after a write.
    fn commit(&mut self) -> Result<()> {
        match &self.embedded {
            Some(server) => server.save()?,
            None => self.session.save()?,
        }
        Ok(())
    }
}

fn client_for(cli: &Cli) -> Result<(Client, KeyFile)> {
    let path = key_path(cli);
    let kf = KeyFile::load(&path).map_err(|e| match e {
        CliError::Core(eseds_core::error::Error::Io(io)) if io.kind() == io::ErrorKind::NotFound => {
            CliError::Usage(format!("no key file at {}", path.display()))
        }
        e => e,
    })?;
    Ok((Client::new(&kf.key, kf.domain()?, kf.mode), kf))
}

fn init(cli: &Cli, a: &InitArgs, out: &mut dyn Write) -> Result<()> {
    let bits = cli.domain_bits.unwrap_or(DEFAULT_DOMAIN_BITS);
    Domain::with_bits(bits)?;
    let (store, mode, index_bits) = if a.decoupled {
        (StoreState::decoupled(a.index_bits)?, StoreMode::Decoupled, a.index_bits)
    } else {
        (StoreState::dense(), StoreMode::Dense, 0)
    };
    let key = keygen(a.security)?;
    // a seeded run gets a reproducible key, for tests and demos only
    let key = match cli.seed {
        Some(_) => {
            let mut bytes = vec![0u8; key.as_bytes().len()];
            rand::RngCore::fill_bytes(&mut coins(cli), &mut bytes);
            SecretKey::from_bytes(&bytes)?
        }
        None => key,
    };
    let kpath = key_path(cli);
    let mut f = File::create_new(&cli.store).map_err(|e| {
        if e.kind() == io::ErrorKind::AlreadyExists {
            CliError::Usage(format!("{} already exists", cli.store.display()))
        } else {
            e.into()
        }
    })?;
    store.save(&mut f)?;
    KeyFile {
        key,
        domain_bits: bits as u8,
        mode,
        index_bits,
    }
    .save(&kpath)?;
    writeln!(
        out,
        "initialized store={} key={} mode={} domain_bits={bits} n=0",
        cli.store.display(),
        kpath.display(),
        match mode {
            StoreMode::Dense => "dense",
            StoreMode::Decoupled => "decoupled",
        }
    )?;
    Ok(())
}

fn insert(cli: &Cli, values: &[u64], out: &mut dyn Write) -> Result<()> {
    let (client, _) = client_for(cli)?;
    for &v in values {
        client.domain().check(v)?;
    }
    let mut coins = coins(cli);
    let mut conn = Connection::open(cli, &mut coins)?;
    let mut n = 0;
    for &v in values {
        n = client.insert(&mut conn.session, v, &mut coins)?;
    }
    conn.commit()?;
    writeln!(out, "inserted count={} n={n}", values.len())?;
    Ok(())
}

fn query(cli: &Cli, a: u64, b: u64, out: &mut dyn Write) -> Result<()> {
    let (client, _) = client_for(cli)?;
    let q = RangeQuery::new(a, b, client.domain())?;
    let mut conn = Connection::open(cli, &mut coins(cli))?;
    let result = client.search_range(&mut conn.session, q)?;
    let rows = client.fetch(&mut conn.session, &result)?;
    let segs: Vec<String> = result
        .segments
        .iter()
        .map(|s| format!("{}..{}", s.lo, s.hi))
        .collect();
    writeln!(out, "segments={} count={}", segs.join(","), rows.len())?;
    writeln!(out, "index\tvalue")?;
    for (j, v) in &rows {
        writeln!(out, "{j}\t{v}")?;
    }
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|(j, v)| vec![j.to_string(), v.to_string()])
        .collect();
    csv_out(cli, &["index", "value"], &csv)
}

fn topk(cli: &Cli, k: usize, out: &mut dyn Write) -> Result<()> {
    let (client, _) = client_for(cli)?;
    let mut conn = Connection::open(cli, &mut coins(cli))?;
    let values = client.top_k(&mut conn.session, k)?;
    let list: Vec<String> = values.iter().map(u64::to_string).collect();
    writeln!(out, "k={k} values={}", list.join(","))?;
    let csv: Vec<Vec<String>> = list
        .into_iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), v])
        .collect();
    csv_out(cli, &["rank", "value"], &csv)
}

fn rebalance(cli: &Cli, batch: u32, out: &mut dyn Write) -> Result<()> {
    let mut coins = coins(cli);
    let mut conn = Connection::open(cli, &mut coins)?;
    match &conn.embedded {
        Some(server) => while !server.rebalance_step(if batch == 0 { usize::MAX } else { batch as usize })? {},
        None => conn.session.rebalance_hint(batch)?,
    }
    conn.commit()?;
    writeln!(out, "rebalanced batch={batch}")?;
    Ok(())
}

fn serve(cli: &Cli, a: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let store = load_store(&cli.store)?;
    let server = Arc::new(Server::new(store, coins(cli)).with_save_path(&cli.store));
    let addr = resolve_addr(cli)?;
    let mut handle = ServerHandle::spawn(Arc::clone(&server), addr.as_str())?;
    if let Some(ms) = a.rebalance_interval_ms {
        handle = handle.with_rebalancer(server, Duration::from_millis(ms), a.rebalance_batch);
    }
    writeln!(out, "listening addr={}", handle.addr())?;
    out.flush()?;
    loop {
        std::thread::park();
    }
}

fn run_bench(cli: &Cli, a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = BenchConfig {
        db_sizes: a.db_sizes.clone(),
        range_sizes: a.range_sizes.clone(),
        k_values: a.k_values.clone(),
        repeats: a.repeats,
        warmup: a.warmup,
        seed: cli.seed.unwrap_or(0),
        queries_per_rep: a.queries,
        domain_bits: cli.domain_bits.unwrap_or(40),
    };
    let rows = bench::run(&cfg)?;
    writeln!(out, "{}", BenchRow::HEADER.join("\t"))?;
    for r in &rows {
        writeln!(out, "{}", r.record().join("\t"))?;
    }
    if let Some(&r) = cfg.range_sizes.first() {
        if let Some(ratio) = bench::growth_ratio(&rows, r) {
            writeln!(out, "growth_ratio range_size={r} ratio={ratio:.3}")?;
        }
    }
    if let Some(fit) = bench::topk_fit(&rows) {
        writeln!(
            out,
            "topk_fit slope_us_per_k={:.4} intercept_us={:.3} r2={:.4}",
            fit.slope, fit.intercept, fit.r2
        )?;
    }
    let csv: Vec<Vec<String>> = rows.iter().map(|r| r.record().to_vec()).collect();
    csv_out(cli, &BenchRow::HEADER, &csv)
}

fn attack(cli: &Cli, a: &AttackArgs, out: &mut dyn Write) -> Result<()> {
    let size = match (a.domain_size, cli.domain_bits) {
        (Some(n), _) => n,
        (None, Some(bits)) => Domain::with_bits(bits)?.size(),
        (None, None) => DEFAULT_ATTACK_DOMAIN,
    };
    let cfg = AttackConfig {
        target: a.target,
        attack: a.attack,
        n: a.n,
        domain: Domain::new(size)?,
        distribution: a.distribution,
        seed: cli.seed.unwrap_or(0),
        trials: a.trials,
        norm: a.norm,
    };
    let r = lab::run(&cfg)?;
    for line in r.lines() {
        writeln!(out, "{line}")?;
    }
    csv_out(
        cli,
        &["attack", "target", "n", "N", "trials", "accuracy", "std_error", "baseline"],
        &[vec![
            r.attack.name().into(),
            r.target.name().into(),
            r.n.to_string(),
            r.domain.to_string(),
            r.trials.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.std_error),
            format!("{:.6}", r.baseline),
        ]],
    )
}

fn run_game(cli: &Cli, a: &GameArgs, out: &mut dyn Write) -> Result<()> {
    let r = game::run_game(&GameConfig {
        trials: a.trials,
        adversary: a.adversary,
        target: a.target,
        seed: cli.seed.unwrap_or(0),
    })?;
    let fields = [
        ("target", r.target.name().to_string()),
        ("adversary", r.adversary.to_string()),
        ("trials", r.trials.to_string()),
        ("success_rate", format!("{:.6}", r.success_rate)),
        ("p", format!("{:.6}", r.mean_p)),
        ("advantage", format!("{:.6}", r.advantage)),
        ("sigma", format!("{:.6}", r.sigma)),
    ];
    for (k, v) in &fields {
        writeln!(out, "{k}={v}")?;
    }
    let header: Vec<&str> = fields.iter().map(|f| f.0).collect();
    csv_out(cli, &header, &[fields.iter().map(|f| f.1.clone()).collect()])
}
