#pragma once

// Canonical dumps of exactly the tables each authority persists. The privacy
// analyzer reads these and nothing else.

#include <string>
#include <vector>

#include "vpki/credentials.hpp"

namespace vpki {

struct TicketLedgerEntry {
  SerialNumber ticket_serial = 0;
  std::string subject_id;
  Interval interval;
  Digest256 target_digest;
  TimePoint issued_at = 0;

  bool operator==(const TicketLedgerEntry&) const = default;
};

/// Foreign ticket exchanged for a native one at this LTCA.
struct ExchangeRecord {
  SerialNumber ticket_serial = 0;
  CaId foreign_issuer;
  SerialNumber foreign_serial = 0;
  Interval interval;
  Digest256 target_digest;
  TimePoint issued_at = 0;

  bool operator==(const ExchangeRecord&) const = default;
};

struct VehicleSummary {
  std::string subject_id;
  std::vector<SerialNumber> ltc_serials;  // history then current
  bool revoked = false;

  bool operator==(const VehicleSummary&) const = default;
};

struct LtcaSnapshot {
  CaId ca_id;
  std::string domain;
  std::vector<VehicleSummary> vehicles;
  std::vector<TicketLedgerEntry> tickets;
  std::vector<ExchangeRecord> exchanges;

  bool operator==(const LtcaSnapshot&) const = default;
};

struct TicketUsage {
  CaId ticket_issuer;
  SerialNumber ticket_serial = 0;
  TimePoint used_at = 0;
  Interval requested;
  std::vector<SerialNumber> pseudonym_serials;

  bool operator==(const TicketUsage&) const = default;
};

struct PseudonymIndexEntry {
  SerialNumber serial = 0;
  CaId ticket_issuer;
  SerialNumber ticket_serial = 0;
  Interval interval;
  PublicKey public_key;

  bool operator==(const PseudonymIndexEntry&) const = default;
};

struct PcaSnapshot {
  CaId ca_id;
  std::string domain;
  std::uint32_t replica = 0;
  std::vector<TicketUsage> usage;
  std::vector<PseudonymIndexEntry> index;
  std::vector<SerialNumber> revoked;

  bool operator==(const PcaSnapshot&) const = default;
};

void encode(Writer& w, const TicketLedgerEntry& v);
void encode(Writer& w, const ExchangeRecord& v);
void encode(Writer& w, const VehicleSummary& v);
void encode(Writer& w, const LtcaSnapshot& v);
void encode(Writer& w, const TicketUsage& v);
void encode(Writer& w, const PseudonymIndexEntry& v);
void encode(Writer& w, const PcaSnapshot& v);
void decode(Reader& r, TicketLedgerEntry& v);
void decode(Reader& r, ExchangeRecord& v);
void decode(Reader& r, VehicleSummary& v);
void decode(Reader& r, LtcaSnapshot& v);
void decode(Reader& r, TicketUsage& v);
void decode(Reader& r, PseudonymIndexEntry& v);
void decode(Reader& r, PcaSnapshot& v);

template <>
struct FileTag<LtcaSnapshot> {
  static constexpr TypeTag value{'S', 'N', 'L', '1'};
};
template <>
struct FileTag<PcaSnapshot> {
  static constexpr TypeTag value{'S', 'N', 'P', '1'};
};

}  // namespace vpki
