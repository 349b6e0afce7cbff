#include "ecc/checkpoint.hpp"

#include <fstream>

#include "ecc/binary_io.hpp"
#include "ecc/errors.hpp"

namespace ecc {

namespace {
constexpr const char* kMagicLine = "ECC-CHECKPOINT";
}

nlohmann::json architecture_to_json(const Architecture& arch) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : arch.layers) {
        layers.push_back({{"kind", to_string(l.kind)},
                          {"d", l.d},
                          {"c", l.c},
                          {"rh", l.rh},
                          {"rw", l.rw},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"activation", to_string(l.activation)}});
    }
    return {{"input", {{"c", arch.input.c}, {"h", arch.input.h}, {"w", arch.input.w}}}, {"layers", layers}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
    try {
        Architecture arch;
        const auto& in = j.at("input");
        arch.input = {in.at("c").get<std::size_t>(), in.value("h", std::size_t{1}), in.value("w", std::size_t{1})};
        std::size_t prev = arch.input.c;
        for (const auto& l : j.at("layers")) {
            LayerSpec s;
            s.kind = parse_layer_kind(l.at("kind").get<std::string>());
            s.d = l.at("d").get<std::size_t>();
            s.c = l.value("c", prev);
            const std::size_t kernel = l.value("kernel", std::size_t{1});
            s.rh = l.value("rh", kernel);
            s.rw = l.value("rw", kernel);
            s.stride = l.value("stride", std::size_t{1});
            s.padding = l.value("padding", std::size_t{0});
            s.activation = parse_activation(l.value("activation", std::string("none")));
            arch.layers.push_back(s);
            prev = s.d;
        }
        arch.validate();
        return arch;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed architecture: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Network& net, const nlohmann::json& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    auto header = architecture_to_json(net.architecture());
    header["format_version"] = kCheckpointFormatVersion;
    header["n_out"] = net.n_out();
    header["meta"] = meta;
    out << kMagicLine << '\n' << header.dump() << '\n';
    for (const auto& l : net.layers) {
        for (double v : l.weight.data()) binary::write_f64(out, v);
        for (double v : l.bias) binary::write_f64(out, v);
    }
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kMagicLine) throw IoError("'" + path + "' is not a checkpoint");
    if (!std::getline(in, line)) throw IoError("'" + path + "': missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': bad header: " + e.what());
    }
    if (header.value("format_version", 0) != kCheckpointFormatVersion) {
        throw IoError("'" + path + "': unsupported checkpoint format version");
    }
    const Architecture arch = architecture_from_json(header);
    if (header.value("n_out", std::size_t{0}) != arch.n_out()) throw IoError("'" + path + "': n_out mismatch");

    LoadedCheckpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    ck.net.input = arch.input;
    for (const auto& spec : arch.layers) {
        Layer layer{spec, Tensor4(spec.weight_shape()), std::vector<double>(spec.d)};
        for (double& v : layer.weight.data()) v = binary::read_f64(in);
        for (double& v : layer.bias) v = binary::read_f64(in);
        ck.net.layers.push_back(std::move(layer));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("'" + path + "': trailing bytes after payload");
    return ck;
}

}  // namespace ecc
