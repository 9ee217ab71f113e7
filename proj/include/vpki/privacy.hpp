#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vpki/snapshot.hpp"

namespace vpki::privacy {

struct PseudonymRef {
  CaId issuer;
  SerialNumber serial = 0;

  auto operator<=>(const PseudonymRef&) const = default;
  std::string str() const { return issuer + "#" + std::to_string(serial); }
};

struct Observation {
  PseudonymRef ref;
  Interval interval;
};

/// What an eavesdropper records: every pseudonym seen on the air with its
/// lifetime. `ground_truth` is for scoring only.
struct Transcript {
  std::vector<Observation> observations;  // sorted by interval.start
  std::optional<std::map<PseudonymRef, std::string>> ground_truth;

  void add(Observation o, std::optional<std::string> owner = std::nullopt);
  void sort();

  std::string to_json_text() const;
  static Transcript from_json_text(const std::string& text);
  static Transcript load(const std::string& path);
  void save(const std::string& path) const;
};

using Chain = std::vector<PseudonymRef>;

/// Greedy lifetime chaining: P links to Q iff Q is the only observation
/// starting when P ends and P the only one ending when Q starts.
std::vector<Chain> link_by_lifetime(const Transcript& transcript);

struct LinkageScore {
  std::size_t proposed_links = 0;
  std::size_t correct_links = 0;
  std::size_t true_links = 0;  // consecutive pseudonyms of the same vehicle
  double precision = 1.0;      // 1.0 when nothing is proposed
  double recall = 1.0;         // 1.0 when there is nothing to find
  double mean_anonymity_set = 0;
  std::size_t switch_instants = 0;
};

/// Throws MissingGroundTruth when the transcript carries none.
LinkageScore score_linkage(const std::vector<Chain>& chains, const Transcript& transcript);

struct Snapshots {
  std::vector<LtcaSnapshot> ltcas;
  std::vector<PcaSnapshot> pcas;

  /// Reads every *.snap file under `dir`. IoError when the directory is missing.
  static Snapshots load_dir(const std::string& dir);
};

/// Facts derivable by a coalition from the union of its members' tables.
struct KnowledgeSet {
  std::vector<std::string> entities;
  std::set<CaId> members;  // authorities whose state was used
  std::set<std::string> ids;
  std::set<std::string> intervals;  // "<holder>:<start>-<end>"
  std::map<std::string, std::string> ticket_links;      // ticket key -> subject id
  std::map<PseudonymRef, std::string> pseudonym_groups;  // pseudonym -> ticket key of its request
  std::map<PseudonymRef, std::string> id_pseudonym_links;

  bool links_ids_to_pseudonyms() const { return !id_pseudonym_links.empty(); }
  /// Every fact of this set is also in `other`.
  bool subset_of(const KnowledgeSet& other) const;
};

/// Entity selectors: LTCA_<domain>, PCA_<domain> (every PCA of the domain),
/// PCA_<domain>_<i> (1-based), or a literal authority id. A selector that
/// matches no snapshot is SnapshotMissing.
KnowledgeSet collusion_closure(const std::vector<std::string>& entities, const Snapshots& snapshots);

std::string to_json_text(const KnowledgeSet& k);

}  // namespace vpki::privacy
