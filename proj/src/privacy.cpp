#include "vpki/privacy.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vpki/errors.hpp"

namespace vpki::privacy {

// --- transcript ----------------------------------------------------------------

void Transcript::add(Observation o, std::optional<std::string> owner) {
  if (owner) {
    if (!ground_truth) ground_truth.emplace();
    (*ground_truth)[o.ref] = std::move(*owner);
  }
  observations.push_back(std::move(o));
}

void Transcript::sort() {
  std::stable_sort(observations.begin(), observations.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.interval.start, a.interval.end, a.ref) < std::tie(b.interval.start, b.interval.end, b.ref);
  });
}

std::string Transcript::to_json_text() const {
  nlohmann::json j;
  j["observations"] = nlohmann::json::array();
  for (const auto& o : observations)
    j["observations"].push_back(
        {{"issuer", o.ref.issuer}, {"serial", o.ref.serial}, {"start", o.interval.start}, {"end", o.interval.end}});
  if (ground_truth) {
    nlohmann::json gt = nlohmann::json::array();
    for (const auto& [ref, owner] : *ground_truth)
      gt.push_back({{"issuer", ref.issuer}, {"serial", ref.serial}, {"vehicle", owner}});
    j["ground_truth"] = gt;
  }
  return j.dump(1);
}

Transcript Transcript::from_json_text(const std::string& text) {
  Transcript t;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& o : j.at("observations"))
      t.observations.push_back(
          Observation{{o.at("issuer").get<std::string>(), o.at("serial").get<SerialNumber>()},
                      Interval{o.at("start").get<TimePoint>(), o.at("end").get<TimePoint>()}});
    if (j.contains("ground_truth")) {
      t.ground_truth.emplace();
      for (const auto& g : j["ground_truth"])
        (*t.ground_truth)[{g.at("issuer").get<std::string>(), g.at("serial").get<SerialNumber>()}] =
            g.at("vehicle").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::decode_error, std::string("transcript: ") + e.what());
  }
  t.sort();
  return t;
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

void Transcript::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  f << to_json_text();
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + path);
}

// --- linking -------------------------------------------------------------------

std::vector<Chain> link_by_lifetime(const Transcript& transcript) {
  auto obs = transcript.observations;
  std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.interval.start, a.ref) < std::tie(b.interval.start, b.ref);
  });
  std::multimap<TimePoint, std::size_t> by_start, by_end;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    by_start.emplace(obs[i].interval.start, i);
    by_end.emplace(obs[i].interval.end, i);
  }

  std::vector<std::optional<std::size_t>> next(obs.size());
  std::vector<bool> has_prev(obs.size(), false);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto t = obs[i].interval.end;
    if (by_start.count(t) != 1 || by_end.count(t) != 1) continue;
    auto j = by_start.find(t)->second;
    next[i] = j;
    has_prev[j] = true;
  }

  std::vector<Chain> chains;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (has_prev[i]) continue;
    Chain c;
    for (std::optional<std::size_t> k = i; k; k = next[*k]) c.push_back(obs[*k].ref);
    chains.push_back(std::move(c));
  }
  return chains;
}

LinkageScore score_linkage(const std::vector<Chain>& chains, const Transcript& transcript) {
  if (!transcript.ground_truth) throw Error(ErrorCode::missing_ground_truth, "transcript has no ground truth");
  const auto& truth = *transcript.ground_truth;
  auto owner = [&](const PseudonymRef& r) -> const std::string* {
    auto it = truth.find(r);
    return it == truth.end() ? nullptr : &it->second;
  };

  LinkageScore s;
  for (const auto& c : chains)
    for (std::size_t i = 1; i < c.size(); ++i) {
      ++s.proposed_links;
      auto a = owner(c[i - 1]), b = owner(c[i]);
      if (a && b && *a == *b) ++s.correct_links;
    }

  std::map<std::string, std::vector<const Observation*>> per_vehicle;
  std::map<TimePoint, std::size_t> starts;
  for (const auto& o : transcript.observations) {
    ++starts[o.interval.start];
    if (auto v = owner(o.ref)) per_vehicle[*v].push_back(&o);
  }
  for (auto& [v, list] : per_vehicle) s.true_links += list.size() - 1;

  if (s.proposed_links) s.precision = static_cast<double>(s.correct_links) / static_cast<double>(s.proposed_links);
  if (s.true_links) s.recall = static_cast<double>(s.correct_links) / static_cast<double>(s.true_links);
  s.switch_instants = starts.size();
  if (!starts.empty()) {
    double total = 0;
    for (const auto& [t, n] : starts) total += static_cast<double>(n);
    s.mean_anonymity_set = total / static_cast<double>(starts.size());
  }
  return s;
}

// --- collusion -----------------------------------------------------------------

Snapshots Snapshots::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io_error, "no snapshot directory " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".snap") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Snapshots s;
  for (const auto& p : files) {
    auto bytes = read_file(p.string());
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, FileTag<LtcaSnapshot>::value.begin()))
      s.ltcas.push_back(decode_file<LtcaSnapshot>(bytes));
    else
      s.pcas.push_back(decode_file<PcaSnapshot>(bytes));
  }
  return s;
}

namespace {

std::string ticket_key(const CaId& issuer, SerialNumber serial) { return issuer + "#" + std::to_string(serial); }

std::string interval_fact(const std::string& holder, const Interval& i) {
  return holder + ":" + std::to_string(i.start) + "-" + std::to_string(i.end);
}

bool matches_pca(const std::string& selector, const PcaSnapshot& p) {
  if (selector == p.ca_id) return true;
  if (selector.rfind("PCA_", 0) != 0) return false;
  auto rest = selector.substr(4);
  if (rest == p.domain) return true;
  auto prefix = p.domain + "_";
  if (rest.rfind(prefix, 0) == 0) return "pca-" + p.domain + "-" + rest.substr(prefix.size()) == p.ca_id;
  return false;
}

bool matches_ltca(const std::string& selector, const LtcaSnapshot& l) {
  return selector == l.ca_id || selector == "LTCA_" + l.domain;
}

}  // namespace

KnowledgeSet collusion_closure(const std::vector<std::string>& entities, const Snapshots& snapshots) {
  KnowledgeSet k;
  k.entities = entities;
  std::vector<const LtcaSnapshot*> ltcas;
  std::vector<const PcaSnapshot*> pcas;
  for (const auto& e : entities) {
    bool found = false;
    for (const auto& l : snapshots.ltcas)
      if (matches_ltca(e, l)) {
        found = true;
        if (k.members.insert(l.ca_id).second) ltcas.push_back(&l);
      }
    for (const auto& p : snapshots.pcas)
      if (matches_pca(e, p)) {
        found = true;
        k.members.insert(p.ca_id);
        if (std::find(pcas.begin(), pcas.end(), &p) == pcas.end()) pcas.push_back(&p);
      }
    if (!found) throw Error(ErrorCode::snapshot_missing, "no snapshot for " + e);
  }

  // Exchanged ticket -> the foreign ticket it replaced.
  std::map<std::string, std::string> exchanged_from;
  for (const auto* l : ltcas) {
    for (const auto& v : l->vehicles) k.ids.insert(v.subject_id);
    for (const auto& t : l->tickets) {
      k.ticket_links[ticket_key(l->ca_id, t.ticket_serial)] = t.subject_id;
      k.intervals.insert(interval_fact(l->ca_id, t.interval));
    }
    for (const auto& x : l->exchanges) {
      exchanged_from[ticket_key(l->ca_id, x.ticket_serial)] = ticket_key(x.foreign_issuer, x.foreign_serial);
      k.intervals.insert(interval_fact(l->ca_id, x.interval));
    }
  }
  for (const auto& [n_tkt, f_tkt] : exchanged_from) {
    auto it = k.ticket_links.find(f_tkt);
    if (it != k.ticket_links.end()) k.ticket_links[n_tkt] = it->second;
  }

  for (const auto* p : pcas)
    for (const auto& u : p->usage) {
      auto key = ticket_key(u.ticket_issuer, u.ticket_serial);
      k.intervals.insert(interval_fact(p->ca_id, u.requested));
      for (auto s : u.pseudonym_serials) k.pseudonym_groups[{p->ca_id, s}] = key;
    }

  for (const auto& [ref, key] : k.pseudonym_groups) {
    auto it = k.ticket_links.find(key);
    if (it != k.ticket_links.end()) k.id_pseudonym_links[ref] = it->second;
  }
  return k;
}

bool KnowledgeSet::subset_of(const KnowledgeSet& o) const {
  auto map_sub = [](const auto& a, const auto& b) {
    for (const auto& [key, v] : a) {
      auto it = b.find(key);
      if (it == b.end() || it->second != v) return false;
    }
    return true;
  };
  return std::includes(o.ids.begin(), o.ids.end(), ids.begin(), ids.end()) &&
         std::includes(o.intervals.begin(), o.intervals.end(), intervals.begin(), intervals.end()) &&
         map_sub(ticket_links, o.ticket_links) && map_sub(pseudonym_groups, o.pseudonym_groups) &&
         map_sub(id_pseudonym_links, o.id_pseudonym_links);
}

std::string to_json_text(const KnowledgeSet& k) {
  std::set<std::string> groups;
  for (const auto& [ref, key] : k.pseudonym_groups) groups.insert(key);
  std::set<std::string> linked_ids;
  for (const auto& [ref, id] : k.id_pseudonym_links) linked_ids.insert(id);
  nlohmann::json j;
  j["entities"] = k.entities;
  j["members"] = k.members;
  j["ids"] = k.ids.size();
  j["intervals"] = k.intervals.size();
  j["ticket_links"] = k.ticket_links.size();
  j["pseudonyms"] = k.pseudonym_groups.size();
  j["pseudonym_groups"] = groups.size();
  j["id_pseudonym_links"] = k.id_pseudonym_links.size();
  j["vehicles_linked_to_pseudonyms"] = linked_ids.size();
  j["links_ids_to_pseudonyms"] = k.links_ids_to_pseudonyms();
  return j.dump(2);
}

}  // namespace vpki::privacy
