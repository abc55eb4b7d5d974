#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tevlog/bytes.hpp"
#include "tevlog/crypto.hpp"

namespace tevlog {

inline constexpr std::uint8_t readout_format_version = 1;

struct Location {
    double latitude = 0.0;
    double longitude = 0.0;

    friend bool operator==(const Location&, const Location&) = default;
};

struct Segment {
    std::string label;
    Bytes body;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// A <random number, search key> pair. The random number is drawn from the
/// OS RNG, never derived from content.
struct BlindingPair {
    std::array<std::uint8_t, 32> random_number{};
    Bytes search_key;

    static BlindingPair generate(Bytes search_key) {
        BlindingPair p;
        if (RAND_bytes(p.random_number.data(), static_cast<int>(p.random_number.size())) != 1) {
            throw Error("RNG failure");
        }
        p.search_key = std::move(search_key);
        return p;
    }

    friend bool operator==(const BlindingPair&, const BlindingPair&) = default;
};

struct WitnessSection {
    std::vector<Digest> segment_digests;
    std::vector<Digest> blinding_digests;

    friend bool operator==(const WitnessSection&, const WitnessSection&) = default;
};

/// Backward links of a readout. apast_offset always records the chain's a,
/// even when apast_digest is absent (a == 1 or index < a).
struct ChainLink {
    Digest prev_digest;
    std::uint32_t prev_offset = 1;
    std::optional<Digest> apast_digest;
    std::uint32_t apast_offset = 1;

    friend bool operator==(const ChainLink&, const ChainLink&) = default;
};

struct Readout {
    std::uint64_t index = 0;
    Bytes sensor_public_key;
    std::int64_t timestamp_us = 0;
    std::optional<Location> location;
    std::vector<Segment> segments;
    std::vector<BlindingPair> blinding_pairs;
    std::optional<ChainLink> chain_link;
    std::optional<WitnessSection> witness;
    bool is_checkpoint = false;
    Signature signature;

    friend bool operator==(const Readout&, const Readout&) = default;
};

// ---------------------------------------------------------------------------
// Canonical encodings

inline void encode(ByteWriter& w, const Segment& s) {
    w.str(s.label);
    w.bytes(s.body);
}

inline void encode(ByteWriter& w, const BlindingPair& p) {
    w.bytes(p.random_number);
    w.bytes(p.search_key);
}

inline void encode(ByteWriter& w, const std::vector<Digest>& ds) {
    w.u32(static_cast<std::uint32_t>(ds.size()));
    for (const auto& d : ds) w.raw(d.bytes);
}

inline void encode(ByteWriter& w, const WitnessSection& ws) {
    encode(w, ws.segment_digests);
    encode(w, ws.blinding_digests);
}

inline void encode(ByteWriter& w, const std::optional<Location>& loc) {
    w.u8(loc ? 1 : 0);
    if (loc) {
        w.f64(loc->latitude);
        w.f64(loc->longitude);
    }
}

inline void encode(ByteWriter& w, const std::optional<ChainLink>& link) {
    w.u8(link ? 1 : 0);
    if (!link) return;
    w.raw(link->prev_digest.bytes);
    w.u32(link->prev_offset);
    w.u8(link->apast_digest ? 1 : 0);
    if (link->apast_digest) w.raw(link->apast_digest->bytes);
    w.u32(link->apast_offset);
}

inline void encode(ByteWriter& w, const Signature& sig) {
    w.bytes(sig.bytes);
    w.bytes(sig.signer);
}

template <typename T>
Bytes canonical_bytes(const T& value) {
    ByteWriter w;
    encode(w, value);
    return std::move(w).take();
}

inline Digest segment_digest(const Segment& s) { return hash(canonical_bytes(s)); }
inline Digest blinding_digest(const BlindingPair& p) { return hash(canonical_bytes(p)); }

inline WitnessSection compute_witness(const std::vector<Segment>& segments,
                                      const std::vector<BlindingPair>& pairs) {
    WitnessSection ws;
    ws.segment_digests.reserve(segments.size());
    for (const auto& s : segments) ws.segment_digests.push_back(segment_digest(s));
    ws.blinding_digests.reserve(pairs.size());
    for (const auto& p : pairs) ws.blinding_digests.push_back(blinding_digest(p));
    return ws;
}

/// Full record encoding: every field, including stored witness and signature.
inline void encode(ByteWriter& w, const Readout& r) {
    w.u8(readout_format_version);
    w.u64(r.index);
    w.bytes(r.sensor_public_key);
    w.i64(r.timestamp_us);
    encode(w, r.location);
    w.u32(static_cast<std::uint32_t>(r.segments.size()));
    for (const auto& s : r.segments) encode(w, s);
    w.u32(static_cast<std::uint32_t>(r.blinding_pairs.size()));
    for (const auto& p : r.blinding_pairs) encode(w, p);
    encode(w, r.chain_link);
    w.u8(r.witness ? 1 : 0);
    if (r.witness) encode(w, *r.witness);
    w.u8(r.is_checkpoint ? 1 : 0);
    encode(w, r.signature);
}

namespace detail {

inline Digest read_digest(ByteReader& rd) {
    Bytes b = rd.raw(Digest::size);
    return Digest::from_view(b);
}

inline std::vector<Digest> read_digests(ByteReader& rd) {
    std::size_t at = rd.offset();
    std::uint32_t n = rd.u32();
    if (static_cast<std::uint64_t>(n) * Digest::size > rd.remaining()) {
        throw DecodeError("digest list overruns input", at);
    }
    std::vector<Digest> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(read_digest(rd));
    return out;
}

}  // namespace detail

/// Parses a full record encoding. Trailing length-prefixed extension blocks
/// are skipped.
inline Readout decode_readout(ByteView data) {
    ByteReader rd(data);
    Readout r;
    std::size_t at = rd.offset();
    if (rd.u8() != readout_format_version) throw DecodeError("unsupported readout version", at);
    r.index = rd.u64();
    r.sensor_public_key = rd.bytes();
    r.timestamp_us = rd.i64();
    if (rd.flag()) r.location = Location{rd.f64(), rd.f64()};

    at = rd.offset();
    std::uint32_t nseg = rd.u32();
    if (nseg > rd.remaining()) throw DecodeError("segment count overruns input", at);
    for (std::uint32_t i = 0; i < nseg; ++i) {
        Segment s;
        s.label = rd.str();
        s.body = rd.bytes();
        r.segments.push_back(std::move(s));
    }
    at = rd.offset();
    std::uint32_t npairs = rd.u32();
    if (npairs > rd.remaining()) throw DecodeError("blinding pair count overruns input", at);
    for (std::uint32_t i = 0; i < npairs; ++i) {
        BlindingPair p;
        at = rd.offset();
        Bytes rnd = rd.bytes();
        if (rnd.size() != p.random_number.size()) throw DecodeError("blinding random number must be 32 bytes", at);
        std::copy(rnd.begin(), rnd.end(), p.random_number.begin());
        p.search_key = rd.bytes();
        r.blinding_pairs.push_back(std::move(p));
    }
    if (rd.flag()) {
        ChainLink link;
        link.prev_digest = detail::read_digest(rd);
        link.prev_offset = rd.u32();
        if (rd.flag()) link.apast_digest = detail::read_digest(rd);
        link.apast_offset = rd.u32();
        r.chain_link = link;
    }
    if (rd.flag()) {
        WitnessSection ws;
        ws.segment_digests = detail::read_digests(rd);
        ws.blinding_digests = detail::read_digests(rd);
        r.witness = std::move(ws);
    }
    r.is_checkpoint = rd.flag();
    r.signature.bytes = rd.bytes();
    r.signature.signer = rd.bytes();
    while (!rd.done()) rd.bytes();
    return r;
}

// ---------------------------------------------------------------------------
// Signed form and final digest

namespace detail {

struct SignedHeader {
    std::uint64_t index;
    const Bytes& public_key;
    std::int64_t timestamp_us;
    const std::optional<Location>& location;
    const std::optional<ChainLink>& chain_link;
    bool is_checkpoint;
};

inline void encode_signed_header(ByteWriter& w, const SignedHeader& h) {
    w.u8(readout_format_version);
    w.u64(h.index);
    w.bytes(h.public_key);
    w.i64(h.timestamp_us);
    encode(w, h.location);
    encode(w, h.chain_link);
    w.u8(h.is_checkpoint ? 1 : 0);
}

// Witnessed readouts bind their bodies through the witness digests; stream
// readouts bind the raw segments and pairs.
inline Bytes witnessed_signing_bytes(const SignedHeader& h, const WitnessSection& ws) {
    ByteWriter w;
    encode_signed_header(w, h);
    w.u8(1);
    encode(w, ws);
    return std::move(w).take();
}

inline Bytes final_bytes(Bytes signing, const Signature& sig) {
    ByteWriter w;
    w.raw(signing);
    encode(w, sig);
    return std::move(w).take();
}

inline SignedHeader header_of(const Readout& r) {
    return {r.index, r.sensor_public_key, r.timestamp_us, r.location, r.chain_link, r.is_checkpoint};
}

}  // namespace detail

/// Bytes covered by the signature: every field except the signature, with
/// witnessed bodies represented by their recomputed digests.
inline Bytes signing_bytes(const Readout& r) {
    auto header = detail::header_of(r);
    if (r.witness) return detail::witnessed_signing_bytes(header, compute_witness(r.segments, r.blinding_pairs));
    ByteWriter w;
    detail::encode_signed_header(w, header);
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(r.segments.size()));
    for (const auto& s : r.segments) encode(w, s);
    w.u32(static_cast<std::uint32_t>(r.blinding_pairs.size()));
    for (const auto& p : r.blinding_pairs) encode(w, p);
    return std::move(w).take();
}

/// The value committed to the anchor: hash over the signed form plus the
/// signature and signer key.
inline Digest final_digest(const Readout& r) {
    return hash(detail::final_bytes(signing_bytes(r), r.signature));
}

/// Returns a description of the first structural or cryptographic defect,
/// or nothing when the readout is internally consistent.
inline std::optional<std::string> readout_defect(const Readout& r) {
    if (r.segments.empty()) return "no segments";
    std::set<std::string> labels;
    for (const auto& s : r.segments) {
        if (!labels.insert(s.label).second) return "duplicate segment label";
    }
    if ((r.index == 0) != !r.chain_link.has_value()) return "chain link inconsistent with index";
    if (r.chain_link) {
        if (r.chain_link->prev_offset != 1) return "previous-link offset must be 1";
        if (r.chain_link->apast_digest && r.chain_link->apast_offset < 2) return "a-past offset below 2";
    }
    if (r.is_checkpoint && !r.witness) return "checkpoint without witness";
    if (r.witness && *r.witness != compute_witness(r.segments, r.blinding_pairs)) return "witness mismatch";
    if (r.signature.signer != r.sensor_public_key) return "signer differs from sensor key";
    if (!verify_signature(r.signature, r.sensor_public_key, signing_bytes(r))) return "bad signature";
    return std::nullopt;
}

inline Readout build_readout(const KeyPair& key, std::uint64_t index, std::int64_t timestamp_us,
                             std::optional<Location> location, std::vector<Segment> segments,
                             std::vector<BlindingPair> blinding_pairs, std::optional<ChainLink> chain_link,
                             bool is_checkpoint) {
    if (segments.empty()) throw Error("readout needs at least one segment");
    if ((index == 0) != !chain_link.has_value()) {
        throw Error("chain link must be absent exactly at index 0");
    }
    std::set<std::string> labels;
    for (const auto& s : segments) {
        if (!labels.insert(s.label).second) throw Error("duplicate segment label: " + s.label);
    }
    Readout r;
    r.index = index;
    r.sensor_public_key = key.public_key();
    r.timestamp_us = timestamp_us;
    r.location = location;
    r.segments = std::move(segments);
    r.blinding_pairs = std::move(blinding_pairs);
    r.chain_link = chain_link;
    r.is_checkpoint = is_checkpoint;
    if (is_checkpoint) r.witness = compute_witness(r.segments, r.blinding_pairs);
    r.signature = sign(key, signing_bytes(r));
    return r;
}

// ---------------------------------------------------------------------------
// Selective disclosure

struct HiddenSegment {
    Digest digest;

    friend bool operator==(const HiddenSegment&, const HiddenSegment&) = default;
};

using SegmentEntry = std::variant<Segment, HiddenSegment>;

/// A witnessed readout with some segments replaced by their digests. Kept
/// distinct from Readout so it can never be chained from.
struct RedactedReadout {
    std::uint64_t index = 0;
    Bytes sensor_public_key;
    std::int64_t timestamp_us = 0;
    std::optional<Location> location;
    std::vector<SegmentEntry> entries;
    std::vector<Digest> blinding_digests;
    std::optional<ChainLink> chain_link;
    WitnessSection witness;
    bool is_checkpoint = false;
    Signature signature;

    friend bool operator==(const RedactedReadout&, const RedactedReadout&) = default;
};

inline RedactedReadout redact(const Readout& r, const std::set<std::string>& keep_labels) {
    if (!r.witness) throw Error("redaction requires a witness section");
    for (const auto& label : keep_labels) {
        bool known = std::any_of(r.segments.begin(), r.segments.end(),
                                 [&](const Segment& s) { return s.label == label; });
        if (!known) throw Error("unknown segment label: " + label);
    }
    RedactedReadout rr;
    rr.index = r.index;
    rr.sensor_public_key = r.sensor_public_key;
    rr.timestamp_us = r.timestamp_us;
    rr.location = r.location;
    for (const auto& s : r.segments) {
        if (keep_labels.contains(s.label)) {
            rr.entries.emplace_back(s);
        } else {
            rr.entries.emplace_back(HiddenSegment{segment_digest(s)});
        }
    }
    for (const auto& p : r.blinding_pairs) rr.blinding_digests.push_back(blinding_digest(p));
    rr.chain_link = r.chain_link;
    rr.witness = *r.witness;
    rr.is_checkpoint = r.is_checkpoint;
    rr.signature = r.signature;
    return rr;
}

inline bool verify_redacted(const RedactedReadout& rr, const Digest& expected_final) noexcept {
    try {
        WitnessSection derived;
        for (const auto& e : rr.entries) {
            if (const auto* s = std::get_if<Segment>(&e)) {
                derived.segment_digests.push_back(segment_digest(*s));
            } else {
                derived.segment_digests.push_back(std::get<HiddenSegment>(e).digest);
            }
        }
        derived.blinding_digests = rr.blinding_digests;
        if (derived != rr.witness) return false;

        detail::SignedHeader header{rr.index,     rr.sensor_public_key, rr.timestamp_us,
                                    rr.location,  rr.chain_link,        rr.is_checkpoint};
        Bytes signing = detail::witnessed_signing_bytes(header, derived);
        if (!verify_signature(rr.signature, rr.sensor_public_key, signing)) return false;
        return hash(detail::final_bytes(std::move(signing), rr.signature)) == expected_final;
    } catch (...) {
        return false;
    }
}

inline void encode(ByteWriter& w, const RedactedReadout& rr) {
    w.u8(readout_format_version);
    w.u64(rr.index);
    w.bytes(rr.sensor_public_key);
    w.i64(rr.timestamp_us);
    encode(w, rr.location);
    w.u32(static_cast<std::uint32_t>(rr.entries.size()));
    for (const auto& e : rr.entries) {
        if (const auto* s = std::get_if<Segment>(&e)) {
            w.u8(1);
            encode(w, *s);
        } else {
            w.u8(0);
            w.raw(std::get<HiddenSegment>(e).digest.bytes);
        }
    }
    encode(w, rr.blinding_digests);
    encode(w, rr.chain_link);
    encode(w, rr.witness);
    w.u8(rr.is_checkpoint ? 1 : 0);
    encode(w, rr.signature);
}

}  // namespace tevlog
