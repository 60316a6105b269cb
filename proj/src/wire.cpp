#include "mixagg/wire.hpp"

#include "mixagg/errors.hpp"

namespace mixagg {

std::string to_string(const ActorId& a) {
    switch (a.kind) {
        case ActorKind::Collector: return "C" + std::to_string(a.index);
        case ActorKind::User: return "U" + std::to_string(a.index);
        case ActorKind::Provider: return "S" + std::to_string(a.index);
    }
    return "?" + std::to_string(a.index);
}

uint32_t SessionParams::derive_cell_len(uint32_t data_bytes, uint32_t pn_bits,
                                        uint32_t key_bits) {
    uint32_t block = key_bits / 8;
    uint32_t floor = block > PAD_OVERHEAD ? block - uint32_t(PAD_OVERHEAD) : 0;
    uint32_t cell = std::max({data_bytes, (pn_bits + 7) / 8, floor, 32u});
    return cell;
}

const char* kind_name(MsgKind k) {
    switch (k) {
        case MsgKind::DataRequest: return "data_request";
        case MsgKind::ShuffleSubmit: return "shuffle_submit";
        case MsgKind::ShuffleForward: return "shuffle_forward";
        case MsgKind::ShuffleFinal: return "shuffle_final";
        case MsgKind::DigestShare: return "digest_share";
        case MsgKind::DataSubmit: return "data_submit";
        case MsgKind::ProviderBundle: return "provider_bundle";
        case MsgKind::SubmitAck: return "submit_ack";
        case MsgKind::AckRelay: return "ack_relay";
        case MsgKind::AbortReport: return "abort_report";
        case MsgKind::Warn: return "warn";
        case MsgKind::BKeyShare: return "b_key_share";
        case MsgKind::BSubmit: return "b_submit";
        case MsgKind::BForward: return "b_forward";
        case MsgKind::BFinal: return "b_final";
        case MsgKind::BGoNoGo: return "b_go_no_go";
        case MsgKind::BKeyReveal: return "b_key_reveal";
    }
    return "unknown";
}

// ---- envelope ----

Bytes sign_span(const Bytes& body, uint64_t sid, MsgKind kind) {
    Bytes m = body;
    put_u64(m, sid);
    put_u16(m, uint16_t(kind));
    return m;
}

Envelope wrap(const Bytes& sk, const Bytes& body, uint64_t sid, MsgKind kind) {
    Envelope env;
    env.body = body;
    env.sid = sid;
    env.kind = kind;
    env.sig = sign(sk, sign_span(body, sid, kind));
    return env;
}

Validity validate(const Envelope& env, const Bytes& pk, uint64_t expected_sid) {
    if (!verify(pk, sign_span(env.body, env.sid, env.kind), env.sig))
        return Validity::BadSignature;
    if (env.sid != expected_sid) return Validity::WrongSession;
    return Validity::Ok;
}

Bytes encode_envelope(const Envelope& env) {
    Bytes w = sign_span(env.body, env.sid, env.kind);
    append(w, env.sig);
    return w;
}

std::optional<Envelope> decode_envelope(const Bytes& wire) {
    if (wire.size() < ENVELOPE_OVERHEAD) return std::nullopt;
    Envelope env;
    size_t body_len = wire.size() - ENVELOPE_OVERHEAD;
    env.body.assign(wire.begin(), wire.begin() + body_len);
    ByteReader r(wire.data() + body_len, ENVELOPE_OVERHEAD);
    uint64_t sid;
    uint16_t kind;
    r.read_u64(sid);
    r.read_u16(kind);
    env.sid = sid;
    env.kind = MsgKind(kind);
    env.sig.assign(wire.end() - SIG_LEN, wire.end());
    return env;
}

// ---- cells ----

Bytes encode_value_cell(uint64_t v, const SessionParams& p) {
    uint32_t w = std::min(p.data_bytes, 8u);
    if (w < 8 && v >> (8 * w)) throw ConfigError("reading does not fit data width");
    Bytes cell(p.cell_len, 0);
    for (uint32_t i = 0; i < w; i++) cell[w - 1 - i] = uint8_t(v >> (8 * i));
    return cell;
}

std::optional<uint64_t> decode_value_cell(const Bytes& cell, const SessionParams& p) {
    if (cell.size() != p.cell_len) return std::nullopt;
    uint32_t w = std::min(p.data_bytes, 8u);
    uint64_t v = 0;
    for (uint32_t i = 0; i < w; i++) v = v << 8 | cell[i];
    return v;
}

Bytes encode_index_cell(const Bytes& pn, const SessionParams& p) {
    if (pn.size() != p.pn_bytes()) throw InternalError("bad index width");
    Bytes cell(p.cell_len, 0);
    std::copy(pn.begin(), pn.end(), cell.begin());
    return cell;
}

Bytes index_from_cell(const Bytes& cell, const SessionParams& p) {
    return Bytes(cell.begin(), cell.begin() + p.pn_bytes());
}

static constexpr char PARAMS_MAGIC[4] = {'M', 'X', 'P', '1'};

Bytes encode_params_cell(const SessionParams& p) {
    Bytes cell;
    cell.reserve(p.cell_len);
    cell.insert(cell.end(), PARAMS_MAGIC, PARAMS_MAGIC + 4);
    put_u16(cell, uint16_t(p.n_users));
    put_u16(cell, uint16_t(p.m_providers));
    put_u32(cell, p.cell_len);
    put_u32(cell, p.key_bits);
    put_u16(cell, uint16_t(p.pn_bits));
    put_u32(cell, p.data_bytes);
    put_u64(cell, p.sid);
    if (cell.size() > p.cell_len) throw InternalError("parameter cell overflow");
    cell.resize(p.cell_len, 0);
    return cell;
}

bool check_params_cell(const Bytes& cell, const SessionParams& p) {
    return cell == encode_params_cell(p);
}

// ---- bodies ----

Bytes encode_data_request(const SessionParams& p, const Bytes& ct) {
    Bytes b = ct;
    append(b, encode_params_cell(p));
    return b;
}

std::optional<DataRequestBody> decode_data_request(const SessionParams& p, const Bytes& b) {
    size_t ct_len = p.layer_ct_len(1);
    if (b.size() != ct_len + p.cell_len) return std::nullopt;
    DataRequestBody out;
    out.ct.assign(b.begin(), b.begin() + ct_len);
    out.params_cell.assign(b.begin() + ct_len, b.end());
    return out;
}

Bytes encode_mix_item(const MixItem& it) {
    Bytes b = it.d0;
    append(b, it.pn);
    return b;
}

Bytes encode_mix_batch(const std::vector<MixItem>& items) {
    Bytes b;
    for (const auto& it : items) append(b, encode_mix_item(it));
    return b;
}

std::optional<MixItem> decode_mix_item(const SessionParams& p, uint32_t layers, const Bytes& b) {
    size_t comp = p.layer_ct_len(layers);
    if (b.size() != 2 * comp) return std::nullopt;
    MixItem it;
    it.d0.assign(b.begin(), b.begin() + comp);
    it.pn.assign(b.begin() + comp, b.end());
    return it;
}

std::optional<std::vector<MixItem>> decode_mix_batch(const SessionParams& p, uint32_t layers,
                                                     const Bytes& b) {
    size_t item = p.item_len(layers);
    if (item == 0 || b.size() % item != 0) return std::nullopt;
    std::vector<MixItem> items;
    items.reserve(b.size() / item);
    for (size_t off = 0; off < b.size(); off += item) {
        Bytes one(b.begin() + off, b.begin() + off + item);
        auto it = decode_mix_item(p, layers, one);
        if (!it) return std::nullopt;
        items.push_back(std::move(*it));
    }
    return items;
}

Bytes encode_digest_share(const Bytes& digest) { return digest; }

std::optional<Bytes> decode_digest_share(const Bytes& b) {
    if (b.size() != HASH_LEN) return std::nullopt;
    return b;
}

Bytes encode_data_submit(const DataSubmitBody& d) {
    Bytes b = d.data_ct;
    append(b, d.index_ct);
    return b;
}

std::optional<DataSubmitBody> decode_data_submit(const SessionParams& p, const Bytes& b) {
    size_t dlen = p.layer_ct_len(1), ilen = p.layer_ct_len(2);
    if (b.size() != dlen + ilen) return std::nullopt;
    DataSubmitBody out;
    out.data_ct.assign(b.begin(), b.begin() + dlen);
    out.index_ct.assign(b.begin() + dlen, b.end());
    return out;
}

Bytes encode_dsm(const Dsm& d) {
    Bytes b = d.data_cell;
    append(b, d.index_ct);
    return b;
}

Bytes encode_provider_bundle(const std::vector<Dsm>& dsms) {
    Bytes b;
    for (const auto& d : dsms) append(b, encode_dsm(d));
    return b;
}

std::optional<Dsm> decode_dsm(const SessionParams& p, const Bytes& b) {
    if (b.size() != p.dsm_len()) return std::nullopt;
    Dsm d;
    d.data_cell.assign(b.begin(), b.begin() + p.cell_len);
    d.index_ct.assign(b.begin() + p.cell_len, b.end());
    return d;
}

std::optional<std::vector<Dsm>> decode_provider_bundle(const SessionParams& p, const Bytes& b) {
    size_t one = p.dsm_len();
    if (one == 0 || b.size() % one != 0) return std::nullopt;
    std::vector<Dsm> out;
    out.reserve(b.size() / one);
    for (size_t off = 0; off < b.size(); off += one) {
        Bytes chunk(b.begin() + off, b.begin() + off + one);
        auto d = decode_dsm(p, chunk);
        if (!d) return std::nullopt;
        out.push_back(std::move(*d));
    }
    return out;
}

Bytes encode_ack_relay(const Bytes& ack_ct) { return ack_ct; }

std::optional<Bytes> decode_ack_relay(const SessionParams& p, const Bytes& b) {
    if (b.size() != p.ack_ct_len()) return std::nullopt;
    return b;
}

Bytes encode_abort(const AbortBody& a) {
    Bytes b;
    put_u16(b, a.reason);
    put_u32(b, a.detail);
    append(b, a.evidence);
    return b;
}

std::optional<AbortBody> decode_abort(const Bytes& b) {
    if (b.size() < 6) return std::nullopt;
    AbortBody a;
    ByteReader r(b);
    r.read_u16(a.reason);
    r.read_u32(a.detail);
    a.evidence.assign(b.begin() + 6, b.end());
    return a;
}

Bytes encode_warn(const WarnBody& w) {
    Bytes b;
    put_u16(b, w.provider);
    append(b, encode_dsm(w.dsm));
    append(b, w.ack_sig);
    return b;
}

std::optional<WarnBody> decode_warn(const SessionParams& p, const Bytes& b) {
    if (b.size() != 2 + p.dsm_len() + SIG_LEN) return std::nullopt;
    WarnBody w;
    ByteReader r(b);
    r.read_u16(w.provider);
    Bytes dsm_bytes(b.begin() + 2, b.begin() + 2 + p.dsm_len());
    auto d = decode_dsm(p, dsm_bytes);
    if (!d) return std::nullopt;
    w.dsm = std::move(*d);
    w.ack_sig.assign(b.end() - SIG_LEN, b.end());
    return w;
}

// ---- baseline ----

Bytes encode_enc_pub(const EncPub& k) {
    Bytes b;
    put_u32(b, k.bits);
    size_t nlen = (mpz_sizeinbase(k.n.get_mpz_t(), 2) + 7) / 8;
    put_u16(b, uint16_t(nlen));
    Bytes nb(nlen, 0);
    size_t count = 0;
    mpz_export(nb.data(), &count, 1, 1, 1, 0, k.n.get_mpz_t());
    append(b, nb);
    put_u32(b, uint32_t(k.e.get_ui()));
    return b;
}

std::optional<EncPub> decode_enc_pub(const Bytes& b) {
    ByteReader r(b);
    uint32_t bits, e;
    uint16_t nlen;
    if (!r.read_u32(bits) || !r.read_u16(nlen)) return std::nullopt;
    Bytes nb;
    if (!r.read_bytes(nb, nlen) || !r.read_u32(e) || r.remaining() != 0) return std::nullopt;
    EncPub k;
    k.bits = bits;
    mpz_import(k.n.get_mpz_t(), nb.size(), 1, 1, 1, 0, nb.data());
    k.e = e;
    return k;
}

Bytes encode_blob(const Bytes& blob) {
    Bytes b;
    put_u32(b, uint32_t(blob.size()));
    append(b, blob);
    return b;
}

std::optional<Bytes> decode_blob(const Bytes& b) {
    ByteReader r(b);
    uint32_t len;
    if (!r.read_u32(len)) return std::nullopt;
    Bytes out;
    if (!r.read_bytes(out, len) || r.remaining() != 0) return std::nullopt;
    return out;
}

Bytes encode_cell_batch(const std::vector<Bytes>& items) {
    Bytes b;
    for (const auto& it : items) append(b, it);
    return b;
}

std::optional<std::vector<Bytes>> decode_cell_batch(size_t item_len, const Bytes& b) {
    if (item_len == 0 || b.size() % item_len != 0) return std::nullopt;
    std::vector<Bytes> out;
    out.reserve(b.size() / item_len);
    for (size_t off = 0; off < b.size(); off += item_len)
        out.emplace_back(b.begin() + off, b.begin() + off + item_len);
    return out;
}

}  // namespace mixagg
