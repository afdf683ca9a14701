#include "dstconf/errors.hpp"
#include "dstconf/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

namespace {

using dstconf::RunConfig;

dstconf::prompts::Scope to_scope(const std::string& s) {
  if (s == "all") return dstconf::prompts::Scope::All;
  if (s == "one") return dstconf::prompts::Scope::One;
  throw dstconf::ConfigError("scope must be 'all' or 'one', got '" + s + "'");
}

dstconf::prompts::SelfProbeMode to_probe(const std::string& s) {
  if (s == "none") return dstconf::prompts::SelfProbeMode::None;
  if (s == "turn") return dstconf::prompts::SelfProbeMode::Turn;
  if (s == "slot") return dstconf::prompts::SelfProbeMode::Slot;
  throw dstconf::ConfigError("self-probe must be 'none', 'turn' or 'slot', got '" + s + "'");
}

/// Raw flag values for subcommands that take a RunConfig. Strings stand in
/// for the enum fields so a config file and explicit flags merge cleanly.
struct RunFlags {
  std::string config_file;
  RunConfig defaults;  // source of the CLI default values

  std::string corpus, schema, train_corpus;
  std::string backend, mock_script, replay_file, replay_mode, replay_fallback;
  std::string endpoint, http_path, model;
  int max_tokens = 0, timeout_ms = 0, max_attempts = 0, backoff_ms = 0;
  std::string description_scope = "all", example_scope = "all", self_probe = "none";
  int few_shot_k = 0;
  std::string verbalized_source, combiner;
  bool no_intercept = false;
  int ece_bins = 0, concurrency = 0;
  std::uint64_t seed = 0;
  std::string out_dir, template_dir;

  std::map<std::string, CLI::Option*> opts;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  const RunConfig& d = f.defaults;
  f.backend = d.backend;
  f.replay_mode = d.replay_mode;
  f.endpoint = d.http.endpoint;
  f.http_path = d.http.path;
  f.model = d.model_id;
  f.max_tokens = d.max_tokens;
  f.timeout_ms = d.http.timeout_ms;
  f.max_attempts = d.http.max_attempts;
  f.backoff_ms = d.http.backoff_ms;
  f.few_shot_k = d.few_shot_k;
  f.verbalized_source = d.verbalized_source;
  f.ece_bins = d.ece_bins;
  f.seed = d.rng_seed;
  f.out_dir = d.output_dir;
  f.concurrency = d.concurrency;

  auto opt = [&](const std::string& name, auto& target, const std::string& help) {
    f.opts[name] = cmd->add_option("--" + name, target, help);
  };
  f.opts["config"] =
      cmd->add_option("--config", f.config_file,
                      "JSON config file; any flag passed explicitly overrides it");
  opt("corpus", f.corpus, "evaluation corpus (JSON)");
  opt("schema", f.schema, "slot schema (JSON)");
  opt("train-corpus", f.train_corpus, "few-shot example source; needed when k > 0");
  opt("backend", f.backend, "mock | http | replay");
  opt("mock-script", f.mock_script, "mock backend script (JSON)");
  opt("replay-file", f.replay_file, "record/replay cache (JSONL)");
  opt("replay-mode", f.replay_mode, "strict | hybrid");
  opt("replay-fallback", f.replay_fallback, "inner backend for hybrid replay: mock | http");
  opt("endpoint", f.endpoint, "HTTP backend base URL");
  opt("http-path", f.http_path, "chat-completions path");
  opt("model", f.model, "model id sent to the backend");
  opt("max-tokens", f.max_tokens, "completion token budget");
  opt("timeout-ms", f.timeout_ms, "HTTP timeout per attempt");
  opt("max-attempts", f.max_attempts, "HTTP retry budget");
  opt("backoff-ms", f.backoff_ms, "initial retry backoff");
  opt("description-scope", f.description_scope, "slot descriptions per prompt: all | one");
  opt("example-scope", f.example_scope, "example states rendered: all | one");
  opt("few-shot-k", f.few_shot_k, "retrieved examples per turn; 0 = zero-shot");
  opt("self-probe", f.self_probe, "none | turn | slot");
  opt("verbalized-source", f.verbalized_source,
      "which confidence feeds the verbalized feature: auto | generation | probe");
  opt("combiner", f.combiner, "trained combiner model (JSON); enables conf_combined");
  f.opts["no-intercept"] =
      cmd->add_flag("--no-intercept", f.no_intercept, "fit the combiner without intercept");
  opt("ece-bins", f.ece_bins, "equal-width ECE bins");
  opt("seed", f.seed, "rng seed for seeded draws");
  opt("out-dir", f.out_dir, "artifact output directory");
  opt("concurrency", f.concurrency, "dialogue-level worker count");
  opt("template-dir", f.template_dir, "prompt template directory");
}

/// Config file first, then every explicitly passed flag on top.
RunConfig resolve(const RunFlags& f) {
  RunConfig c = f.config_file.empty() ? f.defaults : dstconf::load_run_config(f.config_file);
  auto passed = [&](const char* name) {
    auto it = f.opts.find(name);
    return it != f.opts.end() && it->second->count() > 0;
  };
  if (passed("corpus")) c.corpus_path = f.corpus;
  if (passed("schema")) c.schema_path = f.schema;
  if (passed("train-corpus")) c.train_corpus_path = f.train_corpus;
  if (passed("backend")) c.backend = f.backend;
  if (passed("mock-script")) c.mock_script_path = f.mock_script;
  if (passed("replay-file")) c.replay_path = f.replay_file;
  if (passed("replay-mode")) c.replay_mode = f.replay_mode;
  if (passed("replay-fallback")) c.replay_fallback = f.replay_fallback;
  if (passed("endpoint")) c.http.endpoint = f.endpoint;
  if (passed("http-path")) c.http.path = f.http_path;
  if (passed("model")) c.model_id = f.model;
  if (passed("max-tokens")) c.max_tokens = f.max_tokens;
  if (passed("timeout-ms")) c.http.timeout_ms = f.timeout_ms;
  if (passed("max-attempts")) c.http.max_attempts = f.max_attempts;
  if (passed("backoff-ms")) c.http.backoff_ms = f.backoff_ms;
  if (passed("description-scope")) c.strategy.description_scope = to_scope(f.description_scope);
  if (passed("example-scope")) c.strategy.example_scope = to_scope(f.example_scope);
  if (passed("few-shot-k")) c.few_shot_k = f.few_shot_k;
  if (passed("self-probe")) c.self_probe = to_probe(f.self_probe);
  if (passed("verbalized-source")) c.verbalized_source = f.verbalized_source;
  if (passed("combiner")) c.combiner_path = f.combiner;
  if (passed("no-intercept")) c.combiner_intercept = false;
  if (passed("ece-bins")) c.ece_bins = f.ece_bins;
  if (passed("seed")) c.rng_seed = f.seed;
  if (passed("out-dir")) c.output_dir = f.out_dir;
  if (passed("concurrency")) c.concurrency = f.concurrency;
  if (passed("template-dir")) c.template_dir = f.template_dir;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slot-level confidence estimation, combination, and calibration for "
               "LLM-based dialogue state tracking"};
  app.require_subcommand(1);

  auto* eval_cmd = app.add_subcommand("eval", "run DST + confidence evaluation over a corpus");
  RunFlags eval_flags;
  add_run_flags(eval_cmd, eval_flags);

  auto* train_cmd =
      app.add_subcommand("train-combiner", "fit the combined-score regression on a dump");
  RunFlags train_flags;
  add_run_flags(train_cmd, train_flags);
  std::string train_dump, train_out;
  train_cmd->add_option("--dump", train_dump, "labeled score dump (JSONL)")->required();
  train_cmd->add_option("--out", train_out, "model output path (JSON)")->required();

  auto* gen_cmd = app.add_subcommand(
      "gen-ft-data", "generate fine-tuning targets from difficulty assessments");
  RunFlags gen_flags;
  add_run_flags(gen_cmd, gen_flags);
  std::string gen_corpus, gen_out;
  gen_cmd->add_option("--ft-corpus", gen_corpus, "corpus to annotate (JSON)")->required();
  gen_cmd->add_option("--out", gen_out, "dataset output path (JSONL)")->required();

  auto* report_cmd = app.add_subcommand("report", "recompute metrics from a dump");
  std::string report_dump, report_turns, report_format = "table";
  int report_bins = 10;
  std::string report_source = "auto";
  report_cmd->add_option("--dump", report_dump, "score dump (JSONL)")->required();
  report_cmd->add_option("--turns", report_turns, "per-turn states (JSONL); enables JGA/Slot-F");
  report_cmd->add_option("--format", report_format, "table | json | csv");
  report_cmd->add_option("--ece-bins", report_bins, "equal-width ECE bins");
  report_cmd->add_option("--verbalized-source", report_source,
                         "auto | generation | probe for the verbalized row");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval_cmd) {
      const RunConfig config = resolve(eval_flags);
      const dstconf::EvalResult result = dstconf::run_eval(config);
      std::cout << dstconf::render_metrics_table(result.report);
      std::cout << "\nwrote " << result.dump_path << "\n"
                << "wrote " << result.turns_path << "\n"
                << "wrote " << result.report_path << "\n"
                << "wrote " << result.log_path << "\n";
    } else if (*train_cmd) {
      dstconf::train_combiner_cmd(resolve(train_flags), train_dump, train_out);
    } else if (*gen_cmd) {
      dstconf::gen_ft_data(resolve(gen_flags), gen_corpus, gen_out);
      std::cout << "wrote " << gen_out << "\n";
    } else if (*report_cmd) {
      std::optional<std::string> turns;
      if (!report_turns.empty()) turns = report_turns;
      std::cout << dstconf::render_report(report_dump, turns, report_format, report_bins,
                                          report_source);
    }
  } catch (const dstconf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
