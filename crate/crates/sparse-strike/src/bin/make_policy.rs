//! Regenerates the shipped expert policy files under policies/.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

use sparse_strike::envs::distill::{
    grid_chase_expert_policy, mini_pong_expert_policy, GRID_CHASE_GAIN, MINI_PONG_GAIN,
    MINI_PONG_NOOP_BIAS,
};
use sparse_strike::envs::{EnvName, EnvSpec};

#[derive(Parser)]
#[command(name = "make-policy", about = "Write the bundled expert policy files")]
struct Cli {
    /// Directory to write mini_pong_expert.json and grid_chase_expert.json into.
    #[arg(long, default_value = "policies")]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    fs::create_dir_all(&cli.out)?;

    let pong = EnvSpec::defaults(EnvName::MiniPong, 0);
    let policy = mini_pong_expert_policy(pong.shape, MINI_PONG_GAIN, MINI_PONG_NOOP_BIAS);
    policy.validate()?;
    fs::write(
        cli.out.join("mini_pong_expert.json"),
        serde_json::to_vec(&policy)?,
    )?;

    let chase = EnvSpec::defaults(EnvName::GridChase, 0);
    let policy = grid_chase_expert_policy(chase.shape, GRID_CHASE_GAIN);
    policy.validate()?;
    fs::write(
        cli.out.join("grid_chase_expert.json"),
        serde_json::to_vec(&policy)?,
    )?;

    println!("wrote expert policies to {}", cli.out.display());
    Ok(())
}
