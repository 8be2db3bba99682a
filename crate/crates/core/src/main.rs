// SPDX-License-Identifier: Apache-2.0

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TYVCD_LOG", "warn")).init();
    let cli = tyvcd::cli::Cli::parse();
    let code = tyvcd::cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
