// Command-line surface for the variational phylogenetics pipeline: subsplit
// support construction, multi-sample variational training, tree sampling,
// marginal-likelihood / evidence / KL estimation, and data simulation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vbphylo/checkpoint.hpp"
#include "vbphylo/estimators.hpp"
#include "vbphylo/trainer.hpp"

using namespace vbphylo;
using nlohmann::json;

namespace {

struct SupportArgs {
  std::vector<std::string> trees_files;
  std::string mode = "unrooted";
  std::string out;
  int first_k = 0;
};

int cmd_support(const SupportArgs& args) {
  const auto trees = read_candidate_trees(args.trees_files, args.mode == "rooted", args.first_k);
  const auto support = build_support(trees);
  write_support_file(args.out, support);
  std::printf("support: %d root subsplits, %d parent-child pairs, %d clades (%zu trees)\n",
              support.n_root_subsplits(), support.n_pcsps(), support.n_clades(), trees.size());
  return 0;
}

struct TrainArgs {
  std::string alignment;
  std::string support;
  std::string model = "unrooted";
  std::string estimator = "vimco";
  int k = 10;
  bool psp = false;
  long iters = 200000;
  double lr = 0.001;
  long anneal_period = 0;  // 0: per-model default
  std::string coalescent = "constant";
  std::string clock_rate = "free";
  std::string times;
  uint64_t seed = 0;
  std::string checkpoint;
  std::string trace;
  int threads = 1;
  double clip_norm = 0.0;
  int trace_stride = 100;
};

json config_echo(const TrainArgs& args, const TrainConfig& config) {
  json j;
  j["model"] = args.model;
  j["estimator"] = args.estimator;
  j["k"] = config.k;
  j["psp"] = config.psp;
  j["iters"] = config.iters;
  j["lr"] = config.step_size;
  j["anneal_period"] = config.anneal_period;
  j["seed"] = config.seed;
  if (args.model == "timetree") {
    j["coalescent"] = args.coalescent;
    j["clock_rate"] = args.clock_rate;
  }
  return j;
}

int cmd_train(const TrainArgs& args) {
  const Jc69Model jc;
  const auto alignment = read_fasta_file(args.alignment);
  const auto patterns = compress_patterns(alignment);
  auto support = read_support_file(args.support);
  if (support->taxa() != alignment.taxa) {
    throw std::runtime_error("alignment and support taxa differ");
  }

  TrainConfig config;
  config.k = args.k;
  config.estimator = args.estimator == "rws" ? PhiEstimator::kRws : PhiEstimator::kVimco;
  config.iters = args.iters;
  config.step_size = args.lr;
  config.psp = args.psp;
  config.seed = args.seed;
  config.threads = args.threads;
  config.clip_norm = args.clip_norm;
  config.trace_stride = args.trace_stride;
  config.anneal_period =
      args.anneal_period > 0 ? args.anneal_period : (args.model == "timetree" ? 50000 : 100000);

  std::ofstream trace_file;
  std::ostream* trace_out = nullptr;
  if (!args.trace.empty()) {
    trace_file.open(args.trace);
    if (!trace_file) throw std::runtime_error("cannot write trace file: " + args.trace);
    trace_out = &trace_file;
  }

  const std::string echo = config_echo(args, config).dump();

  if (args.model == "unrooted") {
    UnrootedModel model(support, args.psp);
    const auto result = train_unrooted(model, patterns, jc, config, trace_out);
    write_checkpoint_file(args.checkpoint,
                          checkpoint_to_json(model, args.psp, echo, result.rng_state));
    std::printf("trained %ld iterations; final bound %.4f; checkpoint %s\n", result.iters_run,
                result.trace.back().lower_bound, args.checkpoint.c_str());
  } else {
    CoalescentConfig coal;
    coal.kind = args.coalescent == "skyride" ? CoalescentKind::kSkyride
                                             : CoalescentKind::kConstant;
    SamplingTimes times = args.times.empty()
                              ? SamplingTimes::zeros(alignment.taxa.size())
                              : SamplingTimes::read_csv(args.times, alignment.taxa);
    TimeTreeModel model(support, args.psp, coal, std::move(times));
    if (args.clock_rate != "free") {
      model.rate_fixed = true;
      model.fixed_rate = std::stod(args.clock_rate);
    }
    const auto result = train_timetree(model, patterns, jc, config, trace_out);
    write_checkpoint_file(args.checkpoint,
                          checkpoint_to_json(model, args.psp, echo, result.rng_state));
    std::printf("trained %ld iterations; final bound %.4f; checkpoint %s\n", result.iters_run,
                result.trace.back().lower_bound, args.checkpoint.c_str());
  }
  return 0;
}

struct SampleArgs {
  std::string checkpoint;
  int n = 1000;
  bool with_branch_lengths = false;
  uint64_t seed = 0;
  std::string out;
};

int cmd_sample(const SampleArgs& args) {
  const auto ckpt = read_checkpoint_file(args.checkpoint);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    if (!file) throw std::runtime_error("cannot write output file: " + args.out);
    out = &file;
  }
  Rng rng_topology = Rng::substream(args.seed, "topology");
  Rng rng_branch = Rng::substream(args.seed, "branch");
  Rng rng_height = Rng::substream(args.seed, "height");
  Rng rng_rate = Rng::substream(args.seed, "rate");
  for (int i = 0; i < args.n; ++i) {
    if (ckpt.kind == "unrooted") {
      const auto& model = *ckpt.unrooted;
      const auto tree = model.sbn.sample_unrooted(rng_topology);
      if (args.with_branch_lengths) {
        const auto sample = model.branch.sample(model.branch.resolve(tree), rng_branch);
        (*out) << write_newick(tree, &sample.lengths) << '\n';
      } else {
        (*out) << write_newick(tree) << '\n';
      }
    } else {
      const auto& model = *ckpt.timetree;
      const auto tree = model.sbn.sample_rooted(rng_topology);
      if (args.with_branch_lengths) {
        const auto keys = model.heights.resolve(tree);
        const auto alpha = model.heights.sample(keys, rng_height);
        const auto bounds = height_lower_bounds(tree, model.times);
        const auto transform = heights_from_alpha(tree, bounds, alpha.alpha);
        double rate = model.fixed_rate;
        if (!model.rate_fixed) {
          rate = std::exp(model.rate_mu + std::exp(model.rate_log_sigma) * rng_rate.normal());
        }
        const auto lengths = clock_branch_lengths(tree, transform.heights, rate);
        (*out) << write_newick(tree, &lengths) << '\n';
      } else {
        (*out) << write_newick(tree) << '\n';
      }
    }
  }
  return 0;
}

struct EstimateArgs {
  std::string checkpoint;
  std::string alignment;
  bool evidence = false;
  std::string tree;  // newick, for per-tree marginal likelihood
  int n_samples = 1000;
  int repeats = 100;
  uint64_t seed = 0;
  int threads = 1;
};

int cmd_estimate(const EstimateArgs& args) {
  const Jc69Model jc;
  const auto ckpt = read_checkpoint_file(args.checkpoint);
  const auto alignment = read_fasta_file(args.alignment);
  const auto patterns = compress_patterns(alignment);
  Rng rng = Rng::substream(args.seed, "estimate");

  if (args.evidence) {
    EvidenceEstimate estimate;
    if (ckpt.kind == "unrooted") {
      estimate = evidence_estimate(*ckpt.unrooted, patterns, jc, args.n_samples, args.repeats,
                                   rng, args.threads);
    } else {
      estimate = evidence_estimate(*ckpt.timetree, patterns, jc, args.n_samples, args.repeats,
                                   rng, args.threads);
    }
    const bool unnormalized = ckpt.kind == "timetree" &&
                              ckpt.timetree->coalescent.kind == CoalescentKind::kSkyride;
    std::printf("evidence %.4f (%.4f) over %d repeats of %d samples%s\n", estimate.mean,
                estimate.std_dev, args.repeats, args.n_samples,
                unnormalized ? " [up to an additive constant: unnormalized skyride prior]"
                             : "");
    return 0;
  }
  if (args.tree.empty()) throw std::runtime_error("estimate needs --evidence or --tree");
  if (ckpt.kind != "unrooted") {
    throw std::runtime_error("per-tree marginal likelihood is available for unrooted models");
  }
  const auto tree = parse_unrooted_newick(args.tree, &ckpt.support->taxa());
  const auto estimate =
      tree_marginal_likelihood(*ckpt.unrooted, tree, patterns, jc, args.n_samples, rng);
  std::printf("log marginal likelihood %.4f (se %.4f) from %d samples\n", estimate.log_estimate,
              estimate.std_error, estimate.n_samples);
  return 0;
}

struct KlArgs {
  std::string checkpoint;
  std::string reference;
};

int cmd_kl(const KlArgs& args) {
  const auto ckpt = read_checkpoint_file(args.checkpoint);
  const auto ref = read_reference_csv(args.reference, ckpt.kind == "timetree");
  const auto& sbn = ckpt.kind == "unrooted" ? ckpt.unrooted->sbn : ckpt.timetree->sbn;
  const auto result = kl_topology(sbn, ref);
  if (result.uncovered.empty()) {
    std::printf("kl %.6f\n", result.kl);
  } else {
    std::printf("kl inf (%zu reference trees have zero probability)\n",
                result.uncovered.size());
    for (const auto& nw : result.uncovered) std::printf("uncovered: %s\n", nw.c_str());
  }
  return 0;
}

struct SimulateArgs {
  int taxa = 6;
  int sites = 500;
  uint64_t seed = 0;
  std::string out_prefix = "sim";
};

int cmd_simulate(const SimulateArgs& args) {
  const Jc69Model jc;
  const auto taxa = default_taxa(args.taxa);
  Rng rng_topology = Rng::substream(args.seed, "sim-topology");
  const auto tree = random_unrooted_topology(taxa, rng_topology);
  std::vector<double> lengths(tree.n_edges());
  Rng rng_lengths = Rng::substream(args.seed, "sim-lengths");
  for (auto& l : lengths) l = rng_lengths.exponential(10.0);
  Rng rng_alignment = Rng::substream(args.seed, "sim-alignment");
  const auto alignment = simulate_alignment(tree, lengths, jc, args.sites, rng_alignment);

  const std::string fasta_path = args.out_prefix + ".fasta";
  const std::string newick_path = args.out_prefix + ".nwk";
  {
    std::ofstream out(fasta_path);
    if (!out) throw std::runtime_error("cannot write " + fasta_path);
    out << write_fasta(alignment);
  }
  {
    std::ofstream out(newick_path);
    if (!out) throw std::runtime_error("cannot write " + newick_path);
    out << write_newick(tree, &lengths) << '\n';
  }
  std::printf("wrote %s and %s (%d taxa, %d sites)\n", fasta_path.c_str(), newick_path.c_str(),
              args.taxa, args.sites);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational Bayesian phylogenetic inference"};
  app.require_subcommand(1);

  SupportArgs support_args;
  auto* support = app.add_subcommand("support", "build a subsplit support from tree files");
  support->add_option("--trees", support_args.trees_files, "candidate .trees files")
      ->required()
      ->expected(-1);
  support->add_option("--mode", support_args.mode, "unrooted|rooted")
      ->check(CLI::IsMember({"unrooted", "rooted"}));
  support->add_option("--out", support_args.out, "output support JSON")->required();
  support->add_option("--first-k", support_args.first_k, "keep only the first k trees per file");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the variational approximation");
  train->add_option("--alignment", train_args.alignment, "FASTA alignment")->required();
  train->add_option("--support", train_args.support, "support JSON")->required();
  train->add_option("--model", train_args.model, "unrooted|timetree")
      ->check(CLI::IsMember({"unrooted", "timetree"}));
  train->add_option("--estimator", train_args.estimator, "vimco|rws")
      ->check(CLI::IsMember({"vimco", "rws"}));
  train->add_option("--k", train_args.k, "samples per objective (default 10)");
  train->add_flag("--psp", train_args.psp, "primary subsplit pair parameterization");
  train->add_option("--iters", train_args.iters, "iterations (default 200000)");
  train->add_option("--lr", train_args.lr, "step size (default 0.001)");
  train->add_option("--anneal-period", train_args.anneal_period,
                    "annealing period (default 100000 unrooted, 50000 timetree)");
  train->add_option("--coalescent", train_args.coalescent, "constant|skyride (timetree)")
      ->check(CLI::IsMember({"constant", "skyride"}));
  train->add_option("--clock-rate", train_args.clock_rate, "FLOAT or 'free' (timetree)");
  train->add_option("--times", train_args.times, "sampling times CSV (timetree)");
  train->add_option("--seed", train_args.seed, "RNG seed");
  train->add_option("--checkpoint", train_args.checkpoint, "output checkpoint JSON")->required();
  train->add_option("--trace", train_args.trace, "output trace CSV");
  train->add_option("--threads", train_args.threads, "evaluation threads");
  train->add_option("--clip-norm", train_args.clip_norm, "max gradient norm (0 = off)");
  train->add_option("--trace-stride", train_args.trace_stride, "iterations between trace rows");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "sample topologies from a checkpoint");
  sample->add_option("--checkpoint", sample_args.checkpoint, "checkpoint JSON")->required();
  sample->add_option("--n", sample_args.n, "number of samples");
  sample->add_flag("--with-branch-lengths", sample_args.with_branch_lengths,
                   "attach sampled branch lengths");
  sample->add_option("--seed", sample_args.seed, "RNG seed");
  sample->add_option("--out", sample_args.out, "output file (default stdout)");

  EstimateArgs estimate_args;
  auto* estimate = app.add_subcommand("estimate", "evidence or per-tree marginal likelihood");
  estimate->add_option("--checkpoint", estimate_args.checkpoint, "checkpoint JSON")->required();
  estimate->add_option("--alignment", estimate_args.alignment, "FASTA alignment")->required();
  estimate->add_flag("--evidence", estimate_args.evidence, "estimate the model evidence");
  estimate->add_option("--tree", estimate_args.tree, "newick for per-tree marginal likelihood");
  estimate->add_option("--n-samples", estimate_args.n_samples, "samples per estimate");
  estimate->add_option("--repeats", estimate_args.repeats, "independent repeats (evidence)");
  estimate->add_option("--seed", estimate_args.seed, "RNG seed");
  estimate->add_option("--threads", estimate_args.threads, "evaluation threads");

  KlArgs kl_args;
  auto* kl = app.add_subcommand("kl", "KL divergence from a reference distribution");
  kl->add_option("--checkpoint", kl_args.checkpoint, "checkpoint JSON")->required();
  kl->add_option("--reference", kl_args.reference, "reference CSV 'newick,probability'")
      ->required();

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand("simulate", "simulate an alignment and its true tree");
  simulate->add_option("--taxa", simulate_args.taxa, "taxon count");
  simulate->add_option("--sites", simulate_args.sites, "site count");
  simulate->add_option("--seed", simulate_args.seed, "RNG seed");
  simulate->add_option("--out-prefix", simulate_args.out_prefix, "output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (support->parsed()) return cmd_support(support_args);
    if (train->parsed()) {
      if (train_args.model == "unrooted" &&
          (train->count("--coalescent") > 0 || train->count("--clock-rate") > 0 ||
           train->count("--times") > 0)) {
        throw std::runtime_error("--coalescent/--clock-rate/--times need --model timetree");
      }
      return cmd_train(train_args);
    }
    if (sample->parsed()) return cmd_sample(sample_args);
    if (estimate->parsed()) return cmd_estimate(estimate_args);
    if (kl->parsed()) return cmd_kl(kl_args);
    if (simulate->parsed()) return cmd_simulate(simulate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
