#include "sif/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif {

namespace {

using nlohmann::json;

const char* kModeNames[3] = {"user", "item", "context"};

json transform_json(const std::optional<ElementTransform>& t) {
  if (!t) return nullptr;
  return json{{"hidden", t->hidden()},
              {"activation", std::string(activation_name(t->activation()))},
              {"theta", std::vector<double>(t->theta().begin(), t->theta().end())}};
}

std::optional<ElementTransform> transform_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return ElementTransform(j.at("hidden").get<std::size_t>(),
                          parse_activation(j.at("activation").get<std::string>()),
                          j.at("theta").get<std::vector<double>>());
}

json arch_json(const Architecture& arch) {
  json ops = json::array();
  for (const auto& c : arch.ops) ops.push_back(c.name());
  json transforms = json::array();
  for (int m = 0; m < arch.arity(); ++m) transforms.push_back(transform_json(arch.transforms[static_cast<std::size_t>(m)]));
  return json{{"ops", ops}, {"alpha", arch.alpha}, {"transforms", transforms}};
}

json ranking_json(const EvalReport& r) {
  json hit = json::object(), ndcg = json::object();
  for (const auto& [k, v] : r.ranking.hit) hit[std::to_string(k)] = v;
  for (const auto& [k, v] : r.ranking.ndcg) ndcg[std::to_string(k)] = v;
  return json{{"users", r.ranking.users}, {"hit", hit}, {"ndcg", ndcg}};
}

json eval_json(const EvalReport& r) {
  json j{{"split", std::string(split_name(r.split))}, {"count", r.count}, {"rmse", r.rmse}};
  j["ranking"] = r.has_ranking ? ranking_json(r) : json(nullptr);
  return j;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string model_to_json(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset,
                          bool include_embeddings) {
  json j;
  j["order"] = dataset.order();
  j["dims"] = dataset.dims();
  j["embedding_dim"] = params.dim;
  j["predictor"] = std::string(predictor_name(params.predictor));
  j["mlp_hidden"] = params.mlp_hidden;
  j["architecture"] = arch_json(arch);
  j["heads"] = params.heads;
  j["head_inputs"] = params.head_inputs;
  if (include_embeddings) {
    json emb = json::object();
    for (std::size_t m = 0; m < params.embeddings.size(); ++m) {
      const auto& t = params.embeddings[m];
      emb[kModeNames[m]] = json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
    }
    j["embeddings"] = emb;
  }
  return j.dump(1);
}

LoadedModel model_from_json(std::string_view text) {
  LoadedModel out;
  try {
    const auto j = json::parse(text);
    out.order = j.at("order").get<int>();
    out.dims = j.at("dims").get<std::array<std::size_t, 3>>();
    auto& p = out.params;
    p.dim = j.at("embedding_dim").get<std::size_t>();
    p.predictor = parse_predictor(j.at("predictor").get<std::string>());
    p.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    p.heads = j.at("heads").get<std::vector<std::vector<double>>>();
    p.head_inputs = j.at("head_inputs").get<std::vector<std::size_t>>();
    if (!j.contains("embeddings")) throw ParseError("model file has no embeddings; rerun with embeddings saved");
    for (int m = 0; m < out.order; ++m) {
      const auto& e = j.at("embeddings").at(kModeNames[m]);
      Table t;
      t.rows = e.at("rows").get<std::size_t>();
      t.cols = e.at("cols").get<std::size_t>();
      t.data = e.at("data").get<std::vector<double>>();
      if (t.data.size() != t.rows * t.cols) throw ParseError("embedding table size mismatch");
      p.embeddings.push_back(std::move(t));
    }
    const auto& a = j.at("architecture");
    for (const auto& name : a.at("ops")) out.arch.ops.push_back(parse_candidate(name.get<std::string>()));
    out.arch.alpha = a.at("alpha").get<std::vector<double>>();
    const auto& ts = a.at("transforms");
    for (std::size_t m = 0; m < ts.size() && m < 3; ++m) out.arch.transforms[m] = transform_from(ts[m]);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
  check_compatible(out.params, out.arch);
  return out;
}

std::string eval_report_to_json(const EvalReport& report) { return eval_json(report).dump(1); }

std::string eval_csv_header(const EvalReport& report) {
  std::string h = "split,count,rmse";
  for (const auto& [k, v] : report.ranking.hit) h += ",hit@" + std::to_string(k);
  for (const auto& [k, v] : report.ranking.ndcg) h += ",ndcg@" + std::to_string(k);
  return h;
}

std::string eval_csv_row(const EvalReport& report) {
  std::string row = std::string(split_name(report.split)) + "," + std::to_string(report.count) + "," + fmt(report.rmse);
  for (const auto& [k, v] : report.ranking.hit) row += "," + fmt(v);
  for (const auto& [k, v] : report.ranking.ndcg) row += "," + fmt(v);
  return row;
}

std::string search_report_to_json(const SearchReport& report, std::string_view config_json) {
  json j;
  j["method"] = report.method;
  j["selected"] = report.selected;
  j["architecture"] = arch_json(report.arch);
  j["selected_architecture"] = arch_json(report.selected_arch);
  j["search_seconds"] = report.search_seconds;

  json trace = json::array();
  for (const auto& e : report.trace) {
    trace.push_back(json{{"epoch", e.epoch},
                         {"seconds", e.seconds},
                         {"val_objective", e.val_objective},
                         {"val_rmse", e.val_rmse},
                         {"selected", e.selected},
                         {"alpha", e.alpha}});
  }
  j["trace"] = trace;

  if (!report.trials.empty()) {
    json trials = json::array();
    for (const auto& t : report.trials)
      trials.push_back(json{{"op", t.op}, {"p", t.p}, {"q", t.q}, {"r", t.r}, {"val_rmse", t.val_rmse}});
    j["trials"] = trials;
  }

  if (report.retrained) {
    const auto& r = *report.retrained;
    json grid = json::array();
    for (const auto& g : r.grid)
      grid.push_back(json{{"lambda", g.lambda}, {"val_rmse", g.val_rmse}, {"best_epoch", g.best_epoch},
                          {"seconds", g.seconds}});
    j["retrain"] = json{{"lambda", r.lambda},
                        {"grid", grid},
                        {"best_epoch", r.result.best_epoch},
                        {"epochs_run", r.result.epochs.size()},
                        {"val_rmse", r.result.best_val_rmse},
                        {"test", eval_json(r.test)},
                        {"seconds", r.seconds}};
  } else {
    j["retrain"] = nullptr;
  }
  if (!config_json.empty()) j["config"] = json::parse(config_json);
  return j.dump(1);
}

void write_metrics_csv(const std::filesystem::path& path, const SearchReport& report) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "phase,epoch,seconds,train_rmse,val_rmse,test_rmse,val_objective\n";
  for (const auto& e : report.trace)
    f << "search," << e.epoch << ',' << fmt(e.seconds) << ",," << fmt(e.val_rmse) << ",," << fmt(e.val_objective)
      << '\n';
  if (report.retrained) {
    for (const auto& e : report.retrained->result.epochs)
      f << "retrain," << e.epoch << ',' << fmt(e.seconds) << ',' << fmt(e.train_rmse) << ',' << fmt(e.val_rmse) << ','
        << fmt(e.test_rmse) << ",\n";
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace sif
