#include "dta/standardizer.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "dta/error.hpp"

namespace dta {

namespace {

std::vector<std::string> member_texts(const ActionRegistry& registry, std::vector<ActionId>& owners) {
  std::vector<std::string> docs;
  for (const auto& e : registry.entries()) {
    if (!e.id.is_clustered()) continue;
    for (const auto& m : e.members) {
      docs.push_back(m.text);
      owners.push_back(e.id);
    }
  }
  return docs;
}

}  // namespace

Bm25Index registry_index(const ActionRegistry& registry, TextMode mode) {
  std::vector<ActionId> owners;
  auto docs = member_texts(registry, owners);
  Bm25Index::Options options;
  options.mode = mode;
  return Bm25Index(docs, options);
}

Standardizer::Standardizer(const ActionRegistry& registry, const Vectorizer& vectorizer, TextMode mode,
                           std::size_t recall_k)
    : registry_(registry),
      index_(registry_index(registry, mode)),
      featurizer_(vectorizer, index_),
      recall_k_(recall_k) {
  member_texts(registry, doc_action_);
  if (recall_k_ < 1) throw Error("standardizer: recall k must be at least 1");
}

SegmentLabel Standardizer::standardize_segment(std::string_view segment) const {
  SegmentLabel label{ActionId::unk(), 0.0, 0.0, 0, false};
  const auto hits = index_.recall_topk(segment, recall_k_);
  if (hits.empty()) return label;
  const SegmentVector query = featurizer_.vectorizer().embed(segment);
  // hits arrive by descending BM25 then doc id, so a strict comparison
  // implements the tie-break
  bool first = true;
  for (const auto& hit : hits) {
    const double z = reranker_.preactivation(featurizer_.features(segment, query, hit.doc));
    if (first || z > label.preactivation) {
      label.preactivation = z;
      label.matched_doc = hit.doc;
      first = false;
    }
  }
  label.action = doc_action_[label.matched_doc];
  label.confidence = sigmoid(label.preactivation);
  label.recalled = true;
  return label;
}

StandardizedCorpus standardize_corpus(const std::vector<Dialogue>& dialogues, const Standardizer& standardizer,
                                      const SegmenterOptions& segmenter) {
  StandardizedCorpus out;
  std::map<std::string, std::map<std::string, std::size_t>> counts;  // action -> segment -> n
  for (const auto& d : dialogues) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const Turn& turn = d.turns[t];
      if (turn.speaker != Speaker::staff) continue;
      StandardizedTurn st{d.id, t, {}, {}};
      if (turn.is_api()) {
        st.actions.push_back(ActionId::api(turn.api_call->name));
        st.confidence.push_back(1.0);
      } else {
        for (const auto& seg : segment_utterance(turn.text, segmenter)) {
          SegmentLabel label = standardizer.standardize_segment(seg);
          st.actions.push_back(label.action);
          st.confidence.push_back(label.confidence);
          if (label.action.is_clustered()) ++counts[label.action.tag()][seg];
        }
      }
      out.turns.push_back(std::move(st));
    }
  }

  // rebuild the action -> segment frequency table from this corpus;
  // actions that received nothing keep their previous members
  const ActionRegistry& reg = standardizer.registry();
  std::vector<std::size_t> assignment;
  std::vector<SegmentCount> segments;
  for (const auto& e : reg.entries()) {
    if (!e.id.is_clustered()) continue;
    const std::size_t cluster = std::stoul(e.id.tag().substr(1));
    auto it = counts.find(e.id.tag());
    if (it == counts.end() || it->second.empty()) {
      for (const auto& m : e.members) {
        segments.push_back({m.text, m.frequency});
        assignment.push_back(cluster);
      }
      continue;
    }
    for (const auto& [text, n] : it->second) {
      segments.push_back({text, n});
      assignment.push_back(cluster);
    }
  }
  std::vector<std::string> apis;
  for (const auto& id : reg.api_actions()) apis.push_back(id.api_name());
  out.table = build_registry(assignment, segments, apis, reg.cluster_count());
  return out;
}

void write_standardized(std::ostream& out, const std::vector<StandardizedTurn>& turns) {
  for (const auto& t : turns) {
    out << t.dialogue_id << '\t' << t.turn_index << '\t';
    for (std::size_t i = 0; i < t.actions.size(); ++i) out << (i ? " " : "") << t.actions[i].tag();
    out << '\n';
  }
}

std::vector<StandardizedTurn> read_standardized(std::istream& in) {
  std::vector<StandardizedTurn> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, turn, actions;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, turn, '\t'))
      throw ParseError(number, "expected dialogue_id<TAB>turn_index<TAB>actions");
    std::getline(fields, actions);
    StandardizedTurn st;
    st.dialogue_id = id;
    try {
      st.turn_index = std::stoul(turn);
    } catch (const std::exception&) {
      throw ParseError(number, "bad turn index");
    }
    for (const auto& tag : split_whitespace(actions)) {
      st.actions.emplace_back(tag);
      st.confidence.push_back(1.0);
    }
    out.push_back(std::move(st));
  }
  return out;
}

void save_standardized(const std::filesystem::path& path, const std::vector<StandardizedTurn>& turns) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_standardized(out, turns);
}

std::vector<StandardizedTurn> load_standardized(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_standardized(in);
}

}  // namespace dta
