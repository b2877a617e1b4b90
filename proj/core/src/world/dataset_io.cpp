#include "eglom/world/dataset_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace eglom::world {

namespace {

constexpr char kMagic[4] = {'E', 'G', 'L', 'D'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(char(v)); }
    void u32(std::uint32_t v) { put(v); }
    void i32(std::int32_t v) { put(std::uint32_t(v)); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::string& s) { buf_ += s; }
    void symbol(const EllipseSymbol& e) {
        for (double v : e.to_array()) f64(v);
    }
    std::string take() { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    template <class U>
    void put(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(char((v >> (8 * i)) & 0xFF));
    }
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& data, std::size_t begin, std::size_t end,
           std::optional<std::size_t> record)
        : data_(data), pos_(begin), end_(end), record_(record) {}

    std::uint8_t u8() { return std::uint8_t(take(1)[0]); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::int32_t i32() { return std::int32_t(get<std::uint32_t>()); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string bytes(std::size_t n) { return std::string(take(n), n); }
    EllipseSymbol symbol() {
        std::array<double, 6> v{};
        for (double& x : v) x = f64();
        return EllipseSymbol::from_array(v);
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return end_ - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        std::string msg = what;
        if (record_) msg += " (record " + std::to_string(*record_) + ")";
        throw DatasetParseError(msg, record_);
    }

private:
    const char* take(std::size_t n) {
        if (end_ - pos_ < n) fail("dataset truncated at byte " + std::to_string(pos_));
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <class U>
    U get() {
        const char* p = take(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(std::uint8_t(p[i])) << (8 * i);
        return v;
    }

    const std::string& data_;
    std::size_t pos_;
    std::size_t end_;
    std::optional<std::size_t> record_;
};

std::string encode_scene(const Scene& s) {
    Writer w;
    w.u32(std::uint32_t(s.objects.size()));
    for (const auto& o : s.objects) {
        w.i32(o.template_id);
        w.i32(o.class_index);
        w.f64(o.pose.tx);
        w.f64(o.pose.ty);
        w.f64(o.pose.rotation);
        w.f64(o.pose.sx);
        w.f64(o.pose.sy);
        w.f64(o.rotation_distance_deg);
    }
    w.u32(std::uint32_t(s.locations.size()));
    for (const auto& l : s.locations) {
        w.f64(l.cell_x);
        w.f64(l.cell_y);
        w.symbol(l.input);
        w.symbol(l.truth);
        w.i32(l.instance);
        w.i32(l.part);
        w.u8(l.perturbed ? 1 : 0);
    }
    return w.take();
}

Scene decode_scene(Reader& r) {
    Scene s;
    const std::uint32_t n_objects = r.u32();
    if (n_objects > r.remaining() / 56) r.fail("object count exceeds record size");
    s.objects.resize(n_objects);
    for (auto& o : s.objects) {
        o.template_id = r.i32();
        o.class_index = r.i32();
        o.pose.tx = r.f64();
        o.pose.ty = r.f64();
        o.pose.rotation = r.f64();
        o.pose.sx = r.f64();
        o.pose.sy = r.f64();
        o.rotation_distance_deg = r.f64();
    }
    const std::uint32_t n_locations = r.u32();
    if (n_locations > r.remaining() / 121) r.fail("location count exceeds record size");
    s.locations.resize(n_locations);
    for (auto& l : s.locations) {
        l.cell_x = r.f64();
        l.cell_y = r.f64();
        l.input = r.symbol();
        l.truth = r.symbol();
        l.instance = r.i32();
        l.part = r.i32();
        l.perturbed = r.u8() != 0;
        if (l.instance < 0 || std::size_t(l.instance) >= s.objects.size()) {
            r.fail("location refers to missing object " + std::to_string(l.instance));
        }
    }
    if (r.remaining() != 0) r.fail("trailing bytes in scene record");
    return s;
}

}  // namespace

std::string encode_dataset(const Dataset& ds) {
    Writer w;
    w.bytes(std::string(kMagic, 4));
    w.u32(kDatasetFormatVersion);
    w.u32(std::uint32_t(ds.task));
    w.u64(ds.scenes.size());
    w.f64(ds.cell);
    w.u32(std::uint32_t(ds.templates.size()));
    for (const auto& t : ds.templates) {
        w.i32(t.id);
        w.i32(t.class_index);
        w.u32(std::uint32_t(t.name.size()));
        w.bytes(t.name);
        for (const auto& e : t.parts) w.symbol(e);
    }
    std::string out = w.take();
    for (const auto& s : ds.scenes) {
        const std::string payload = encode_scene(s);
        Writer len;
        len.u64(payload.size());
        out += len.take();
        out += payload;
    }
    return out;
}

Dataset decode_dataset(const std::string& bytes) {
    Reader h(bytes, 0, bytes.size(), std::nullopt);
    if (h.bytes(4) != std::string(kMagic, 4)) h.fail("not an eglom dataset file (bad magic)");
    const std::uint32_t version = h.u32();
    if (version != kDatasetFormatVersion) {
        throw DatasetVersionError("dataset format version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(kDatasetFormatVersion) + ")");
    }
    Dataset ds;
    const std::uint32_t task = h.u32();
    if (task > std::uint32_t(Task::one_from_twenty)) h.fail("unknown task tag " + std::to_string(task));
    ds.task = Task(task);
    const std::uint64_t count = h.u64();
    ds.cell = h.f64();
    const std::uint32_t n_templates = h.u32();
    for (std::uint32_t i = 0; i < n_templates; ++i) {
        ObjectTemplate t;
        t.id = h.i32();
        t.class_index = h.i32();
        const std::uint32_t len = h.u32();
        t.name = h.bytes(len);
        for (auto& e : t.parts) e = h.symbol();
        ds.templates.push_back(std::move(t));
    }
    std::size_t pos = h.pos();
    if (count > (bytes.size() - pos) / 8) h.fail("scene count exceeds file size");
    ds.scenes.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Reader lr(bytes, pos, bytes.size(), std::size_t(i));
        const std::uint64_t len = lr.u64();
        if (len > lr.remaining()) lr.fail("dataset truncated inside scene record");
        Reader r(bytes, lr.pos(), lr.pos() + len, std::size_t(i));
        ds.scenes.push_back(decode_scene(r));
        pos = lr.pos() + len;
    }
    if (pos != bytes.size()) {
        throw DatasetParseError("trailing bytes after the last scene record", std::nullopt);
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    const std::string bytes = encode_dataset(ds);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("short write on dataset " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_dataset(ss.str());
}

std::string dataset_to_json(const Dataset& ds, int indent) {
    using json = nlohmann::ordered_json;
    auto sym = [](const EllipseSymbol& e) { return json(e.to_array()); };
    json j;
    j["format_version"] = kDatasetFormatVersion;
    j["task"] = std::string(task_name(ds.task));
    j["count"] = ds.scenes.size();
    j["cell"] = ds.cell;
    j["templates"] = json::array();
    for (const auto& t : ds.templates) {
        json parts = json::array();
        for (const auto& e : t.parts) parts.push_back(sym(e));
        j["templates"].push_back({{"id", t.id}, {"class", t.class_index}, {"name", t.name},
                                  {"parts", parts}});
    }
    j["scenes"] = json::array();
    for (const auto& s : ds.scenes) {
        json objects = json::array();
        for (const auto& o : s.objects) {
            json jo = {{"template", o.template_id},
                       {"class", o.class_index},
                       {"pose", {{"tx", o.pose.tx}, {"ty", o.pose.ty}, {"rotation", o.pose.rotation},
                                 {"sx", o.pose.sx}, {"sy", o.pose.sy}}}};
            if (std::isfinite(o.rotation_distance_deg)) jo["rotation_distance_deg"] = o.rotation_distance_deg;
            objects.push_back(std::move(jo));
        }
        json locations = json::array();
        for (const auto& l : s.locations) {
            locations.push_back({{"cell", {l.cell_x, l.cell_y}},
                                 {"input", sym(l.input)},
                                 {"truth", sym(l.truth)},
                                 {"instance", l.instance},
                                 {"part", l.part},
                                 {"perturbed", l.perturbed}});
        }
        j["scenes"].push_back({{"objects", objects}, {"locations", locations}});
    }
    return j.dump(indent);
}

}  // namespace eglom::world
