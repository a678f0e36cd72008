#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmclab/backend.hpp"
#include "gmclab/experiment.hpp"

namespace {

using gmclab::json;

void print_table(const std::vector<gmclab::ComparisonRow>& rows) {
  std::printf("%-18s %6s %14s %14s %10s %10s %8s %s\n", "record", "N", "ln_mc", "ln_pred", "std_err", "z", "ess",
              "flag");
  for (const auto& r : rows)
    std::printf("%-18s %6d %14.6f %14.6f %10.4g %10.3f %8.1f %s\n", r.label.c_str(), r.n, r.ln_mc, r.ln_prediction,
                r.std_error, r.z_score, r.ess, r.flagged ? "FLAGGED" : "ok");
  if (rows.size() >= 2) {
    const auto t = gmclab::ratio_trend(rows);
    std::printf("trend |ln ratio| by N:");
    for (std::size_t i = 0; i < t.ns.size(); ++i) std::printf(" %d:%.4f", t.ns[i], std::abs(t.ln_ratio[i]));
    std::printf("  (decreasing in %d of %zu steps)\n", t.decreasing_steps, t.ns.size() - 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  gmclab::select_blas_kernel(argv);

  CLI::App app{"gmclab: experiments on characteristic polynomials of non-Hermitian random matrices"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output;
  bool resume = false;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run an experiment and write record.json");
  run->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override master_seed");
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--output", output, "output directory");
  run->add_flag("--resume", resume, "reuse completed batches from an earlier run with the same config");
  run->add_flag("--quiet", quiet, "no progress lines on stderr");

  std::vector<std::string> records;
  bool as_json = false;
  auto* compare = app.add_subcommand("compare", "compare kpoint/onepoint records with their predictions");
  compare->add_option("records", records, "record.json files")->required()->check(CLI::ExistingFile);
  compare->add_flag("--json", as_json, "emit the table as JSON");

  std::string record_path;
  std::string plot_dir;
  std::string style = "svg";
  auto* plot = app.add_subcommand("plot", "write plot files for a record");
  plot->add_option("record", record_path, "record.json")->required()->check(CLI::ExistingFile);
  plot->add_option("--output", plot_dir, "directory for plot files (default: next to the record)");
  plot->add_option("--style", style, "output format")->check(CLI::IsMember({"svg"}));

  std::string check_path;
  auto* validate = app.add_subcommand("validate-config", "check a config against the schema and print its digest");
  validate->add_option("config", check_path, "config file")->required()->check(CLI::ExistingFile);

  auto* kinds = app.add_subcommand("list-kinds", "list experiment kinds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      gmclab::RunOptions opt;
      opt.seed = seed;
      opt.workers = workers;
      opt.output = output;
      opt.resume = resume;
      if (!quiet) opt.progress = [](const json& line) { std::cerr << line.dump() << std::endl; };
      const json record = gmclab::run_experiment(gmclab::load_json(config_path), opt);
      std::cout << record["config"]["output"].get<std::string>() << "/record.json\n";
    } else if (*compare) {
      std::vector<gmclab::ComparisonRow> rows;
      for (const auto& r : records) {
        rows.push_back(gmclab::compare_record(gmclab::load_record(r)));
        rows.back().label = r;
      }
      if (as_json) std::cout << gmclab::comparison_json(rows).dump(2) << "\n";
      else print_table(rows);
    } else if (*plot) {
      const json record = gmclab::load_record(record_path);
      const std::filesystem::path dir =
          plot_dir.empty() ? std::filesystem::path(record_path).parent_path() : std::filesystem::path(plot_dir);
      for (const auto& f : gmclab::plot_record(record, dir.empty() ? "." : dir)) std::cout << f.string() << "\n";
    } else if (*validate) {
      const auto rc = gmclab::resolve_config(gmclab::load_json(check_path));
      std::cout << "valid " << rc.config["kind"].get<std::string>() << " " << rc.digest << "\n";
    } else if (*kinds) {
      for (const auto& k : gmclab::experiment_kinds()) std::printf("%-18s %s\n", k.name, k.summary);
    }
  } catch (const gmclab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
