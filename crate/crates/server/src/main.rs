use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use ascribe_server::pipeline::REPORT_FILE;
use ascribe_server::{
    run_pipeline, scan_assets, CatalogError, ExportFormat, PipelineConfig, PipelineError,
    ServeOptions, Server,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ascribe", version, about = "Collaborative scientific scene server and pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Host a collaborative session.
    Serve(ServeArgs),
    /// Filter, segment, mesh and quantify an image stack.
    Pipeline(PipelineArgs),
    /// Asset catalog tools.
    Assets {
        #[command(subcommand)]
        command: AssetsCommand,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    assets_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// HTTP and WebSocket port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Newline-delimited JSON port; defaults to PORT + 1.
    #[arg(long)]
    tcp_port: Option<u16>,
    #[arg(long)]
    session_token: String,
    /// Place imported meshes in front of the spawn point.
    #[arg(long)]
    recenter_imports: bool,
    /// Static files served under /viewer.
    #[arg(long)]
    viewer_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "pipeline-out")]
    out: PathBuf,
    #[arg(long)]
    stack_dir: Option<PathBuf>,
    #[arg(long)]
    diffusion_iterations: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    diffusion_lambda: Option<f64>,
    #[arg(long)]
    threshold_lo: Option<f64>,
    #[arg(long)]
    threshold_hi: Option<f64>,
    #[arg(long)]
    smooth_iterations: Option<usize>,
    #[arg(long)]
    smooth_lambda: Option<f64>,
    #[arg(long, value_parser = parse_format)]
    format: Option<ExportFormat>,
}

#[derive(Subcommand)]
enum AssetsCommand {
    /// Print the catalog of an asset directory.
    List {
        #[arg(long)]
        assets_dir: PathBuf,
        /// Emit a JSON array instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    match s.to_ascii_lowercase().as_str() {
        "stl" => Ok(ExportFormat::Stl),
        "obj" => Ok(ExportFormat::Obj),
        other => Err(format!("unknown format {other:?}, expected stl or obj")),
    }
}

impl PipelineArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(d) = &self.stack_dir {
            cfg.stack_dir = d.clone();
        }
        let d = &mut cfg.diffusion;
        d.iterations = self.diffusion_iterations.unwrap_or(d.iterations);
        d.kappa = self.kappa.unwrap_or(d.kappa);
        d.lambda = self.diffusion_lambda.unwrap_or(d.lambda);
        let t = &mut cfg.threshold;
        t.lo = self.threshold_lo.unwrap_or(t.lo);
        t.hi = self.threshold_hi.unwrap_or(t.hi);
        let s = &mut cfg.smooth;
        s.iterations = self.smooth_iterations.unwrap_or(s.iterations);
        s.lambda = self.smooth_lambda.unwrap_or(s.lambda);
        if let Some(f) = self.format {
            cfg.export.format = f;
        }
    }
}

fn pipeline(args: PipelineArgs) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::from_file(&args.config)?;
    args.apply(&mut cfg);
    let report = run_pipeline(&cfg, &args.out)?;
    let summary = serde_json::json!({
        "components": report.component_count,
        "files": report.components.iter().map(|c| &c.file).collect::<Vec<_>>(),
        "report": args.out.join(REPORT_FILE),
    });
    println!("{summary}");
    Ok(())
}

fn assets_list(dir: PathBuf, json: bool) -> anyhow::Result<()> {
    let entries = scan_assets(&dir)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&entries)?);
        return Ok(());
    }
    for e in entries {
        let slices = e.slice_count.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        println!("{:<10} {:>12} {:>6}  {}", format!("{:?}", e.kind), e.size, slices, e.name);
    }
    Ok(())
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async {
        let server = Server::bind(ServeOptions {
            assets_dir: args.assets_dir,
            bind: args.bind,
            port: args.port,
            tcp_port: args.tcp_port,
            session_token: args.session_token,
            recenter_imports: args.recenter_imports,
            viewer_dir: args.viewer_dir,
        })
        .await?;
        println!(
            "http+ws on {}, tcp on {}",
            server.http_addr()?,
            server.tcp_addr()?
        );
        server.run().await?;
        Ok(())
    })
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(p) = e.downcast_ref::<PipelineError>() {
        p.kind()
    } else if let Some(c) = e.downcast_ref::<CatalogError>() {
        c.kind()
    } else {
        "Error"
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASCRIBE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Assets {
            command: AssetsCommand::List { assets_dir, json },
        } => assets_list(assets_dir, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": error_kind(&e), "message": format!("{e:#}")});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
