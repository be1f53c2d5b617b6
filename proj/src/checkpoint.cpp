#include "vbphylo/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vbphylo {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json support_to_json_obj(const SubsplitSupport& support) {
  json j;
  j["format_version"] = kFormatVersion;
  j["taxa"] = support.taxa().names();
  json roots = json::array();
  for (const auto& s : support.root_subsplits()) roots.push_back(s.to_string());
  j["root_subsplits"] = std::move(roots);
  json sets = json::array();
  for (const auto& set : support.child_sets()) {
    json children = json::array();
    for (const auto& c : set.children) children.push_back(c.to_string());
    sets.push_back({{"parent", set.parent.to_string()},
                    {"side", set.side == 0 ? "y" : "z"},
                    {"children", std::move(children)}});
  }
  j["child_sets"] = std::move(sets);
  json clades = json::array();
  for (const auto& c : support.clades()) clades.push_back(c.to_string());
  j["clades"] = std::move(clades);
  return j;
}

std::shared_ptr<SubsplitSupport> support_from_json_obj(const json& j) {
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("unsupported support format version");
  }
  auto support =
      std::make_shared<SubsplitSupport>(TaxonSet(j.at("taxa").get<std::vector<std::string>>()));
  for (const auto& s : j.at("root_subsplits")) {
    support->add_root_subsplit(Subsplit::from_string(s.get<std::string>()));
  }
  for (const auto& set : j.at("child_sets")) {
    const Subsplit parent = Subsplit::from_string(set.at("parent").get<std::string>());
    for (const auto& c : set.at("children")) {
      support->add_pcsp({parent, Subsplit::from_string(c.get<std::string>())});
    }
  }
  for (const auto& c : j.at("clades")) {
    support->add_clade(Clade::from_string(c.get<std::string>()));
  }
  support->finalize();
  return support;
}

json coalescent_to_json(const CoalescentConfig& config) {
  json j;
  j["kind"] = config.kind == CoalescentKind::kConstant ? "constant" : "skyride";
  j["constant_mu0"] = config.constant_mu0;
  j["constant_sigma0"] = config.constant_sigma0;
  j["skyride_a"] = config.skyride_a;
  j["skyride_b"] = config.skyride_b;
  j["skyride_delta"] = config.skyride_delta;
  return j;
}

CoalescentConfig coalescent_from_json(const json& j) {
  CoalescentConfig config;
  config.kind = j.at("kind").get<std::string>() == "constant" ? CoalescentKind::kConstant
                                                              : CoalescentKind::kSkyride;
  config.constant_mu0 = j.at("constant_mu0").get<double>();
  config.constant_sigma0 = j.at("constant_sigma0").get<double>();
  config.skyride_a = j.at("skyride_a").get<double>();
  config.skyride_b = j.at("skyride_b").get<double>();
  config.skyride_delta = j.at("skyride_delta").get<std::vector<double>>();
  return config;
}

json common_header(const std::string& kind, bool psp, const SubsplitSupport& support,
                   const std::string& config_echo, const std::string& rng_state) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["psp"] = psp;
  j["support"] = support_to_json_obj(support);
  j["config"] = config_echo.empty() ? json::object() : json::parse(config_echo);
  j["rng_state"] = rng_state;
  return j;
}

}  // namespace

std::string support_to_json(const SubsplitSupport& support) {
  return support_to_json_obj(support).dump(2);
}

std::shared_ptr<SubsplitSupport> support_from_json(const std::string& text) {
  return support_from_json_obj(json::parse(text));
}

void write_support_file(const std::string& path, const SubsplitSupport& support) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write support file: " + path);
  out << support_to_json(support) << '\n';
}

std::shared_ptr<SubsplitSupport> read_support_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open support file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return support_from_json(buf.str());
}

std::string checkpoint_to_json(const UnrootedModel& model, bool psp,
                               const std::string& config_echo, const std::string& rng_state) {
  json j = common_header("unrooted", psp, *model.support, config_echo, rng_state);
  j["sbn_phi"] = model.sbn.params();
  j["branch"] = {{"mu_split", model.branch.mu_split},
                 {"log_sigma_split", model.branch.log_sigma_split},
                 {"mu_psp", model.branch.mu_psp},
                 {"log_sigma_psp", model.branch.log_sigma_psp},
                 {"prior_rate", model.branch_prior_rate}};
  return j.dump(2);
}

std::string checkpoint_to_json(const TimeTreeModel& model, bool psp,
                               const std::string& config_echo, const std::string& rng_state) {
  json j = common_header("timetree", psp, *model.support, config_echo, rng_state);
  j["sbn_phi"] = model.sbn.params();
  j["heights"] = {{"mu_root", model.heights.mu_root},
                  {"log_sigma_root", model.heights.log_sigma_root},
                  {"mu_clade", model.heights.mu_clade},
                  {"log_sigma_clade", model.heights.log_sigma_clade},
                  {"mu_psp", model.heights.mu_psp},
                  {"log_sigma_psp", model.heights.log_sigma_psp}};
  j["gamma"] = {{"mu", model.gamma_mu}, {"log_sigma", model.gamma_log_sigma}};
  j["rate"] = {{"fixed", model.rate_fixed},
               {"fixed_value", model.fixed_rate},
               {"mu", model.rate_mu},
               {"log_sigma", model.rate_log_sigma},
               {"prior_mu", model.rate_prior_mu},
               {"prior_sigma", model.rate_prior_sigma}};
  j["coalescent"] = coalescent_to_json(model.coalescent);
  j["sampling_times"] = model.times.times;
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version");
  }
  Checkpoint ckpt;
  ckpt.kind = j.at("kind").get<std::string>();
  ckpt.psp = j.at("psp").get<bool>();
  ckpt.support = support_from_json_obj(j.at("support"));
  ckpt.config_echo = j.at("config").dump();
  ckpt.rng_state = j.at("rng_state").get<std::string>();

  if (ckpt.kind == "unrooted") {
    UnrootedModel model(ckpt.support, ckpt.psp);
    model.sbn.set_params(j.at("sbn_phi").get<std::vector<double>>());
    const auto& b = j.at("branch");
    model.branch.mu_split = b.at("mu_split").get<std::vector<double>>();
    model.branch.log_sigma_split = b.at("log_sigma_split").get<std::vector<double>>();
    model.branch.mu_psp = b.at("mu_psp").get<std::vector<double>>();
    model.branch.log_sigma_psp = b.at("log_sigma_psp").get<std::vector<double>>();
    model.branch_prior_rate = b.at("prior_rate").get<double>();
    ckpt.unrooted.emplace(std::move(model));
  } else if (ckpt.kind == "timetree") {
    SamplingTimes times{j.at("sampling_times").get<std::vector<double>>()};
    TimeTreeModel model(ckpt.support, ckpt.psp, coalescent_from_json(j.at("coalescent")),
                        std::move(times));
    model.sbn.set_params(j.at("sbn_phi").get<std::vector<double>>());
    const auto& h = j.at("heights");
    model.heights.mu_root = h.at("mu_root").get<std::vector<double>>();
    model.heights.log_sigma_root = h.at("log_sigma_root").get<std::vector<double>>();
    model.heights.mu_clade = h.at("mu_clade").get<std::vector<double>>();
    model.heights.log_sigma_clade = h.at("log_sigma_clade").get<std::vector<double>>();
    model.heights.mu_psp = h.at("mu_psp").get<std::vector<double>>();
    model.heights.log_sigma_psp = h.at("log_sigma_psp").get<std::vector<double>>();
    model.gamma_mu = j.at("gamma").at("mu").get<std::vector<double>>();
    model.gamma_log_sigma = j.at("gamma").at("log_sigma").get<std::vector<double>>();
    const auto& r = j.at("rate");
    model.rate_fixed = r.at("fixed").get<bool>();
    model.fixed_rate = r.at("fixed_value").get<double>();
    model.rate_mu = r.at("mu").get<double>();
    model.rate_log_sigma = r.at("log_sigma").get<double>();
    model.rate_prior_mu = r.at("prior_mu").get<double>();
    model.rate_prior_sigma = r.at("prior_sigma").get<double>();
    ckpt.timetree.emplace(std::move(model));
  } else {
    throw std::runtime_error("unknown checkpoint kind: " + ckpt.kind);
  }
  return ckpt;
}

void write_checkpoint_file(const std::string& path, const std::string& json_text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file: " + path);
  out << json_text << '\n';
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace vbphylo
