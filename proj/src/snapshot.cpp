#include "vpki/snapshot.hpp"

namespace vpki {

void encode(Writer& w, const TicketLedgerEntry& v) {
  w.u64(v.ticket_serial);
  w.str(v.subject_id);
  encode(w, v.interval);
  encode(w, v.target_digest);
  w.i64(v.issued_at);
}
void decode(Reader& r, TicketLedgerEntry& v) {
  v.ticket_serial = r.u64();
  v.subject_id = r.str();
  decode(r, v.interval);
  decode(r, v.target_digest);
  v.issued_at = r.i64();
}

void encode(Writer& w, const ExchangeRecord& v) {
  w.u64(v.ticket_serial);
  w.str(v.foreign_issuer);
  w.u64(v.foreign_serial);
  encode(w, v.interval);
  encode(w, v.target_digest);
  w.i64(v.issued_at);
}
void decode(Reader& r, ExchangeRecord& v) {
  v.ticket_serial = r.u64();
  v.foreign_issuer = r.str();
  v.foreign_serial = r.u64();
  decode(r, v.interval);
  decode(r, v.target_digest);
  v.issued_at = r.i64();
}

void encode(Writer& w, const VehicleSummary& v) {
  w.str(v.subject_id);
  w.count(v.ltc_serials.size());
  for (auto s : v.ltc_serials) w.u64(s);
  w.boolean(v.revoked);
}
void decode(Reader& r, VehicleSummary& v) {
  v.subject_id = r.str();
  v.ltc_serials.resize(r.count(8));
  for (auto& s : v.ltc_serials) s = r.u64();
  v.revoked = r.boolean();
}

void encode(Writer& w, const LtcaSnapshot& v) {
  w.str(v.ca_id);
  w.str(v.domain);
  encode_seq(w, v.vehicles);
  encode_seq(w, v.tickets);
  encode_seq(w, v.exchanges);
}
void decode(Reader& r, LtcaSnapshot& v) {
  v.ca_id = r.str();
  v.domain = r.str();
  decode_seq(r, v.vehicles, 9);
  decode_seq(r, v.tickets, 8);
  decode_seq(r, v.exchanges, 8);
}

void encode(Writer& w, const TicketUsage& v) {
  w.str(v.ticket_issuer);
  w.u64(v.ticket_serial);
  w.i64(v.used_at);
  encode(w, v.requested);
  w.count(v.pseudonym_serials.size());
  for (auto s : v.pseudonym_serials) w.u64(s);
}
void decode(Reader& r, TicketUsage& v) {
  v.ticket_issuer = r.str();
  v.ticket_serial = r.u64();
  v.used_at = r.i64();
  decode(r, v.requested);
  v.pseudonym_serials.resize(r.count(8));
  for (auto& s : v.pseudonym_serials) s = r.u64();
}

void encode(Writer& w, const PseudonymIndexEntry& v) {
  w.u64(v.serial);
  w.str(v.ticket_issuer);
  w.u64(v.ticket_serial);
  encode(w, v.interval);
  encode(w, v.public_key);
}
void decode(Reader& r, PseudonymIndexEntry& v) {
  v.serial = r.u64();
  v.ticket_issuer = r.str();
  v.ticket_serial = r.u64();
  decode(r, v.interval);
  decode(r, v.public_key);
}

void encode(Writer& w, const PcaSnapshot& v) {
  w.str(v.ca_id);
  w.str(v.domain);
  w.u32(v.replica);
  encode_seq(w, v.usage);
  encode_seq(w, v.index);
  w.count(v.revoked.size());
  for (auto s : v.revoked) w.u64(s);
}
void decode(Reader& r, PcaSnapshot& v) {
  v.ca_id = r.str();
  v.domain = r.str();
  v.replica = r.u32();
  decode_seq(r, v.usage, 8);
  decode_seq(r, v.index, 8);
  v.revoked.resize(r.count(8));
  for (auto& s : v.revoked) s = r.u64();
}

}  // namespace vpki
