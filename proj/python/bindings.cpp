// Python interface: the main library operations behind a thin wrapper around
// the JSON checkpoint/support formats used by the CLI.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "vbphylo/checkpoint.hpp"
#include "vbphylo/estimators.hpp"
#include "vbphylo/trainer.hpp"

namespace py = pybind11;
using namespace vbphylo;

namespace {

struct PySupport {
  std::shared_ptr<SubsplitSupport> support;
};

struct PySbn {
  std::shared_ptr<SubsplitSupport> support;
  std::unique_ptr<SbnModel> model;
};

TrainConfig make_config(int k, long iters, double lr, long anneal_period, uint64_t seed,
                        bool psp, const std::string& estimator) {
  TrainConfig config;
  config.k = k;
  config.iters = iters;
  config.step_size = lr;
  config.anneal_period = anneal_period;
  config.seed = seed;
  config.psp = psp;
  config.estimator = estimator == "rws" ? PhiEstimator::kRws : PhiEstimator::kVimco;
  return config;
}

py::dict trace_to_dict(const TrainResult& result) {
  py::list iters, betas, bounds;
  for (const auto& row : result.trace) {
    iters.append(row.iter);
    betas.append(row.beta);
    bounds.append(row.lower_bound);
  }
  py::dict out;
  out["iter"] = iters;
  out["beta"] = betas;
  out["lower_bound"] = bounds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_vbphylo, m) {
  m.doc() = "variational Bayesian phylogenetic inference";

  m.def(
      "canonical_newick",
      [](const std::string& text) {
        const auto parsed = parse_newick(text);
        return parsed.rooted ? write_newick(*parsed.rooted_tree)
                             : write_newick(*parsed.unrooted_tree);
      },
      py::arg("newick"), "Canonical topology-only Newick (children in taxon order).");

  m.def(
      "taxon_names",
      [](const std::string& text) {
        const auto parsed = parse_newick(text);
        return parsed.rooted ? parsed.rooted_tree->taxa.names()
                             : parsed.unrooted_tree->taxa.names();
      },
      py::arg("newick"));

  m.def(
      "simulate",
      [](int n_taxa, int sites, uint64_t seed) {
        const Jc69Model jc;
        const auto taxa = default_taxa(n_taxa);
        Rng rng_topology = Rng::substream(seed, "sim-topology");
        const auto tree = random_unrooted_topology(taxa, rng_topology);
        std::vector<double> lengths(tree.n_edges());
        Rng rng_lengths = Rng::substream(seed, "sim-lengths");
        for (auto& l : lengths) l = rng_lengths.exponential(10.0);
        Rng rng_alignment = Rng::substream(seed, "sim-alignment");
        const auto alignment = simulate_alignment(tree, lengths, jc, sites, rng_alignment);
        return py::make_tuple(write_fasta(alignment), write_newick(tree, &lengths));
      },
      py::arg("n_taxa"), py::arg("sites"), py::arg("seed") = 0,
      "Random topology with Exp(10) branch lengths and a JC69 alignment; "
      "returns (fasta, newick).");

  py::class_<PySupport>(m, "Support")
      .def_property_readonly(
          "taxa", [](const PySupport& self) { return self.support->taxa().names(); })
      .def_property_readonly(
          "n_root_subsplits",
          [](const PySupport& self) { return self.support->n_root_subsplits(); })
      .def_property_readonly("n_pcsps",
                             [](const PySupport& self) { return self.support->n_pcsps(); })
      .def_property_readonly("n_clades",
                             [](const PySupport& self) { return self.support->n_clades(); })
      .def("to_json", [](const PySupport& self) { return support_to_json(*self.support); });

  m.def(
      "build_support",
      [](const std::vector<std::string>& newicks, bool rooted) {
        return PySupport{std::make_shared<SubsplitSupport>(
            build_support(candidate_trees_from_newicks(newicks, rooted)))};
      },
      py::arg("newicks"), py::arg("rooted") = false,
      "Collect root subsplits and parent-child pairs from candidate trees.");

  m.def(
      "support_from_json",
      [](const std::string& text) { return PySupport{support_from_json(text)}; },
      py::arg("json_text"));

  py::class_<PySbn>(m, "SbnModel")
      .def(py::init([](const PySupport& support) {
             PySbn out{support.support, nullptr};
             out.model = std::make_unique<SbnModel>(out.support.get());
             return out;
           }),
           py::arg("support"))
      .def_property(
          "params", [](const PySbn& self) { return self.model->params(); },
          [](PySbn& self, std::vector<double> phi) { self.model->set_params(std::move(phi)); })
      .def("log_rooted_prob",
           [](const PySbn& self, const std::string& newick) {
             return self.model->log_rooted_prob(
                 parse_rooted_newick(newick, &self.support->taxa()));
           })
      .def("rooted_prob",
           [](const PySbn& self, const std::string& newick) {
             return self.model->rooted_prob(parse_rooted_newick(newick, &self.support->taxa()));
           })
      .def("unrooted_prob",
           [](const PySbn& self, const std::string& newick) {
             return self.model
                 ->unrooted_prob(parse_unrooted_newick(newick, &self.support->taxa()))
                 .prob;
           })
      .def(
          "sample",
          [](const PySbn& self, int n, uint64_t seed, bool rooted) {
            Rng rng = Rng::substream(seed, "topology");
            std::vector<std::string> out;
            out.reserve(n);
            for (int i = 0; i < n; ++i) {
              out.push_back(rooted ? write_newick(self.model->sample_rooted(rng))
                                   : write_newick(self.model->sample_unrooted(rng)));
            }
            return out;
          },
          py::arg("n"), py::arg("seed") = 0, py::arg("rooted") = false);

  m.def(
      "train_unrooted",
      [](const std::string& fasta, const PySupport& support, int k, long iters, double lr,
         long anneal_period, uint64_t seed, bool psp, const std::string& estimator) {
        const Jc69Model jc;
        const auto alignment = parse_fasta(fasta);
        if (alignment.taxa != support.support->taxa()) {
          throw std::invalid_argument("alignment and support taxa differ");
        }
        const auto patterns = compress_patterns(alignment);
        UnrootedModel model(support.support, psp);
        const auto config = make_config(k, iters, lr, anneal_period, seed, psp, estimator);
        const auto result = train_unrooted(model, patterns, jc, config);
        py::dict out;
        out["checkpoint"] = checkpoint_to_json(model, psp, "{}", result.rng_state);
        out["trace"] = trace_to_dict(result);
        out["final_bound"] = result.trace.back().lower_bound;
        return out;
      },
      py::arg("fasta"), py::arg("support"), py::arg("k") = 10, py::arg("iters") = 1000,
      py::arg("lr") = 0.001, py::arg("anneal_period") = 1000, py::arg("seed") = 0,
      py::arg("psp") = false, py::arg("estimator") = "vimco",
      "Multi-sample variational training; returns a checkpoint JSON and the trace.");

  m.def(
      "train_timetree",
      [](const std::string& fasta, const PySupport& support, int k, long iters, double lr,
         long anneal_period, uint64_t seed, bool psp, const std::string& estimator,
         const std::string& coalescent, const std::string& clock_rate,
         const std::vector<double>& sampling_times) {
        const Jc69Model jc;
        const auto alignment = parse_fasta(fasta);
        if (alignment.taxa != support.support->taxa()) {
          throw std::invalid_argument("alignment and support taxa differ");
        }
        const auto patterns = compress_patterns(alignment);
        CoalescentConfig coal;
        coal.kind = coalescent == "skyride" ? CoalescentKind::kSkyride
                                            : CoalescentKind::kConstant;
        SamplingTimes times = sampling_times.empty()
                                  ? SamplingTimes::zeros(alignment.taxa.size())
                                  : SamplingTimes{sampling_times};
        times.validate();
        TimeTreeModel model(support.support, psp, coal, std::move(times));
        if (clock_rate != "free") {
          model.rate_fixed = true;
          model.fixed_rate = std::stod(clock_rate);
        }
        const auto config = make_config(k, iters, lr, anneal_period, seed, psp, estimator);
        const auto result = train_timetree(model, patterns, jc, config);
        py::dict out;
        out["checkpoint"] = checkpoint_to_json(model, psp, "{}", result.rng_state);
        out["trace"] = trace_to_dict(result);
        out["final_bound"] = result.trace.back().lower_bound;
        return out;
      },
      py::arg("fasta"), py::arg("support"), py::arg("k") = 10, py::arg("iters") = 1000,
      py::arg("lr") = 0.001, py::arg("anneal_period") = 1000, py::arg("seed") = 0,
      py::arg("psp") = false, py::arg("estimator") = "vimco",
      py::arg("coalescent") = "constant", py::arg("clock_rate") = "free",
      py::arg("sampling_times") = std::vector<double>{});

  m.def(
      "sample_checkpoint",
      [](const std::string& checkpoint_json, int n, uint64_t seed, bool with_lengths) {
        const auto ckpt = checkpoint_from_json(checkpoint_json);
        Rng rng_topology = Rng::substream(seed, "topology");
        Rng rng_branch = Rng::substream(seed, "branch");
        std::vector<std::string> out;
        out.reserve(n);
        for (int i = 0; i < n; ++i) {
          if (ckpt.kind == "unrooted") {
            const auto tree = ckpt.unrooted->sbn.sample_unrooted(rng_topology);
            if (with_lengths) {
              const auto sample =
                  ckpt.unrooted->branch.sample(ckpt.unrooted->branch.resolve(tree), rng_branch);
              out.push_back(write_newick(tree, &sample.lengths));
            } else {
              out.push_back(write_newick(tree));
            }
          } else {
            const auto& model = *ckpt.timetree;
            const auto tree = model.sbn.sample_rooted(rng_topology);
            if (with_lengths) {
              const auto alpha = model.heights.sample(model.heights.resolve(tree), rng_branch);
              const auto bounds = height_lower_bounds(tree, model.times);
              const auto transform = heights_from_alpha(tree, bounds, alpha.alpha);
              const double rate =
                  model.rate_fixed ? model.fixed_rate : std::exp(model.rate_mu);
              const auto lengths = clock_branch_lengths(tree, transform.heights, rate);
              out.push_back(write_newick(tree, &lengths));
            } else {
              out.push_back(write_newick(tree));
            }
          }
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("n"), py::arg("seed") = 0,
      py::arg("with_lengths") = false);

  m.def(
      "evidence",
      [](const std::string& checkpoint_json, const std::string& fasta, int n_samples,
         int repeats, uint64_t seed) {
        const Jc69Model jc;
        const auto ckpt = checkpoint_from_json(checkpoint_json);
        const auto patterns = compress_patterns(parse_fasta(fasta));
        Rng rng = Rng::substream(seed, "estimate");
        const auto estimate =
            ckpt.kind == "unrooted"
                ? evidence_estimate(*ckpt.unrooted, patterns, jc, n_samples, repeats, rng)
                : evidence_estimate(*ckpt.timetree, patterns, jc, n_samples, repeats, rng);
        return py::make_tuple(estimate.mean, estimate.std_dev);
      },
      py::arg("checkpoint"), py::arg("fasta"), py::arg("n_samples") = 1000,
      py::arg("repeats") = 100, py::arg("seed") = 0,
      "Stochastic lower-bound estimate of log p(Y); returns (mean, std over repeats).");

  m.def(
      "tree_marginal_likelihood",
      [](const std::string& checkpoint_json, const std::string& fasta,
         const std::string& newick, int n_samples, uint64_t seed) {
        const Jc69Model jc;
        const auto ckpt = checkpoint_from_json(checkpoint_json);
        if (ckpt.kind != "unrooted") {
          throw std::invalid_argument("per-tree estimation needs an unrooted checkpoint");
        }
        const auto patterns = compress_patterns(parse_fasta(fasta));
        const auto tree = parse_unrooted_newick(newick, &ckpt.support->taxa());
        Rng rng = Rng::substream(seed, "estimate");
        const auto estimate =
            tree_marginal_likelihood(*ckpt.unrooted, tree, patterns, jc, n_samples, rng);
        return py::make_tuple(estimate.log_estimate, estimate.std_error);
      },
      py::arg("checkpoint"), py::arg("fasta"), py::arg("newick"),
      py::arg("n_samples") = 1000, py::arg("seed") = 0);

  m.def(
      "kl_topology",
      [](const std::string& checkpoint_json,
         const std::vector<std::pair<std::string, double>>& reference) {
        const auto ckpt = checkpoint_from_json(checkpoint_json);
        const auto ref = reference_from_pairs(reference, ckpt.kind == "timetree");
        const auto& sbn =
            ckpt.kind == "unrooted" ? ckpt.unrooted->sbn : ckpt.timetree->sbn;
        const auto result = kl_topology(sbn, ref);
        py::dict out;
        out["kl"] = result.kl;
        out["uncovered"] = result.uncovered;
        return out;
      },
      py::arg("checkpoint"), py::arg("reference"));
}
