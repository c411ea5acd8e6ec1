// Python bindings. Values cross the boundary as plain Python objects; numpy
// arrays map to typed arrays in both directions, and deserialized arrays are
// read-only views into the payload bytes.

#include "hprm/bench.hpp"
#include "hprm/error.hpp"
#include "hprm/serde.hpp"
#include "hprm/tag.hpp"
#include "hprm/topology.hpp"

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

hprm::DType dtype_from_numpy(const py::dtype& dt) {
  const auto size = dt.itemsize();
  switch (dt.kind()) {
    case 'b': return hprm::DType::boolean;
    case 'i':
      if (size == 1) return hprm::DType::int8;
      if (size == 2) return hprm::DType::int16;
      if (size == 4) return hprm::DType::int32;
      if (size == 8) return hprm::DType::int64;
      break;
    case 'u':
      if (size == 1) return hprm::DType::uint8;
      if (size == 2) return hprm::DType::uint16;
      if (size == 4) return hprm::DType::uint32;
      if (size == 8) return hprm::DType::uint64;
      break;
    case 'f':
      if (size == 4) return hprm::DType::float32;
      if (size == 8) return hprm::DType::float64;
      break;
  }
  throw py::type_error("unsupported array dtype " + py::str(dt).cast<std::string>());
}

const char* numpy_name(hprm::DType t) {
  switch (t) {
    case hprm::DType::int8: return "int8";
    case hprm::DType::uint8: return "uint8";
    case hprm::DType::int16: return "int16";
    case hprm::DType::uint16: return "uint16";
    case hprm::DType::int32: return "int32";
    case hprm::DType::uint32: return "uint32";
    case hprm::DType::int64: return "int64";
    case hprm::DType::uint64: return "uint64";
    case hprm::DType::float32: return "float32";
    case hprm::DType::float64: return "float64";
    case hprm::DType::boolean: return "bool";
  }
  return "uint8";
}

std::span<const std::byte> bytes_view(const char* data, std::size_t size) {
  return {reinterpret_cast<const std::byte*>(data), size};
}

/// Converts a Python object tree. Buffers borrow from the Python objects, so
/// everything in `keep` must outlive the returned value.
hprm::Value to_value(py::handle o, std::vector<py::object>& keep) {
  if (o.is_none()) return {};
  if (py::isinstance<py::bool_>(o)) return o.cast<bool>();
  if (py::isinstance<py::int_>(o)) return o.cast<std::int64_t>();
  if (py::isinstance<py::float_>(o)) return o.cast<double>();
  if (py::isinstance<py::str>(o)) return o.cast<std::string>();
  if (py::isinstance<py::bytes>(o)) {
    const auto s = o.cast<std::string_view>();
    return hprm::Blob{hprm::Buffer::borrow(bytes_view(s.data(), s.size()))};
  }
  if (py::isinstance<py::array>(o)) {
    auto arr = py::array::ensure(o, py::array::c_style);
    if (!arr) throw py::error_already_set();
    std::vector<std::uint64_t> shape(arr.shape(), arr.shape() + arr.ndim());
    const auto dtype = dtype_from_numpy(arr.dtype());
    auto view = bytes_view(static_cast<const char*>(arr.data()), static_cast<std::size_t>(arr.nbytes()));
    keep.push_back(arr);
    return hprm::TypedArray(dtype, std::move(shape), hprm::Buffer::borrow(view));
  }
  if (py::isinstance<py::list>(o) || py::isinstance<py::tuple>(o)) {
    hprm::Value::Sequence seq;
    for (auto item : o) seq.push_back(to_value(item, keep));
    return seq;
  }
  if (py::isinstance<py::dict>(o)) {
    hprm::Value::Map map;
    for (auto [k, v] : o.cast<py::dict>()) {
      if (!py::isinstance<py::str>(k)) throw py::type_error("map keys must be str");
      map.emplace(k.cast<std::string>(), to_value(v, keep));
    }
    return map;
  }
  throw py::type_error("cannot serialize object of type " + py::str(py::type::handle_of(o).attr("__name__")).cast<std::string>());
}

py::object from_value(const hprm::Value& v, py::handle base) {
  return std::visit(
      [&](const auto& x) -> py::object {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return py::none();
        } else if constexpr (std::is_same_v<T, bool> || std::is_same_v<T, std::int64_t> ||
                             std::is_same_v<T, double> || std::is_same_v<T, std::string>) {
          return py::cast(x);
        } else if constexpr (std::is_same_v<T, hprm::Blob>) {
          return py::bytes(reinterpret_cast<const char*>(x.data.data()), x.data.size());
        } else if constexpr (std::is_same_v<T, hprm::TypedArray>) {
          std::vector<py::ssize_t> shape(x.shape.begin(), x.shape.end());
          py::array arr(py::dtype::from_args(py::str(numpy_name(x.dtype))), shape, x.data.data(), base);
          arr.attr("setflags")("write"_a = false);
          return std::move(arr);
        } else if constexpr (std::is_same_v<T, hprm::Value::Sequence>) {
          py::list out;
          for (const auto& item : x) out.append(from_value(item, base));
          return std::move(out);
        } else {
          py::dict out;
          for (const auto& [k, item] : x) out[py::str(k)] = from_value(item, base);
          return std::move(out);
        }
      },
      v.storage());
}

/// Array base for deserialized values: in-band arrays own their bytes inside
/// the value, out-of-band ones borrow from the wire bytes.
struct Decoded {
  py::object wire;
  hprm::Value value;
};

hprm::SerdeOptions options(std::optional<std::size_t> floor) {
  hprm::SerdeOptions o;
  if (floor) o.out_of_band_floor = *floor;
  return o;
}

const char* strategy_name(hprm::SerializationStrategy s) {
  switch (s) {
    case hprm::SerializationStrategy::in_band: return "in_band";
    case hprm::SerializationStrategy::out_of_band: return "out_of_band";
    case hprm::SerializationStrategy::recursive: return "recursive";
  }
  return "";
}

hprm::Delay delay_of(std::optional<std::int64_t> ns) {
  return ns ? hprm::Delay(hprm::Nanos{*ns}) : hprm::Delay::none();
}

}  // namespace

PYBIND11_MODULE(_hprm, m) {
  m.doc() = "Deterministic federated pub/sub middleware: tags, serialization and topology checks";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<hprm::Error>(m, "HprmError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const hprm::Error& e) {
      const auto& type = error_type.get_stored();
      py::object err = type(e.what());
      err.attr("code") = std::string(hprm::to_string(e.code()));
      PyErr_SetObject(type.ptr(), err.ptr());
    }
  });

  py::class_<hprm::Tag>(m, "Tag")
      .def(py::init<std::int64_t, std::uint32_t>(), "time"_a, "microstep"_a = 0)
      .def_property_readonly("time", &hprm::Tag::time)
      .def_property_readonly("microstep", &hprm::Tag::microstep)
      .def_static("never", &hprm::Tag::never)
      .def_static("forever", &hprm::Tag::forever)
      .def("is_never", &hprm::Tag::is_never)
      .def("is_forever", &hprm::Tag::is_forever)
      .def("is_finite", &hprm::Tag::is_finite)
      .def(py::self == py::self)
      .def(py::self != py::self)
      .def(py::self < py::self)
      .def(py::self <= py::self)
      .def(py::self > py::self)
      .def(py::self >= py::self)
      .def("__hash__", [](const hprm::Tag& t) { return py::hash(py::make_tuple(t.time(), t.microstep())); })
      .def("__repr__", [](const hprm::Tag& t) { return "Tag(" + hprm::to_string(t) + ")"; });

  m.def(
      "delay_tag", [](const hprm::Tag& g, std::optional<std::int64_t> ns) { return hprm::delay_tag(g, delay_of(ns)); },
      "tag"_a, "delay_ns"_a = py::none(),
      "Tag of a message sent at `tag` over a connection delayed by `delay_ns` (None for no delay).");
  m.def("next_microstep", &hprm::next_microstep, "tag"_a);

  m.def(
      "serialize",
      [](py::handle obj, std::optional<std::size_t> floor) {
        std::vector<py::object> keep;
        const auto wire = hprm::encode_inline(hprm::serialize(to_value(obj, keep), options(floor)));
        return py::bytes(reinterpret_cast<const char*>(wire.data()), wire.size());
      },
      "obj"_a, "out_of_band_floor"_a = py::none(),
      "Encodes a value tree as header plus segments. Arrays and bytes at or above the floor travel out of band.");
  m.def(
      "deserialize",
      [](const py::bytes& data) {
        const auto s = std::string_view(data);
        const auto payload = hprm::decode_inline(hprm::Buffer::borrow(bytes_view(s.data(), s.size())));
        auto* decoded = new Decoded{data, hprm::deserialize(payload)};
        py::capsule base(decoded, [](void* p) { delete static_cast<Decoded*>(p); });
        return from_value(decoded->value, base);
      },
      "data"_a, "Decodes bytes from serialize(); arrays come back as read-only views into `data`.");
  m.def(
      "classify",
      [](py::handle obj, std::optional<std::size_t> floor) {
        std::vector<py::object> keep;
        return strategy_name(hprm::classify(to_value(obj, keep), options(floor)));
      },
      "obj"_a, "out_of_band_floor"_a = py::none());
  m.def(
      "payload_layout",
      [](py::handle obj, std::optional<std::size_t> floor) {
        std::vector<py::object> keep;
        const auto p = hprm::serialize(to_value(obj, keep), options(floor));
        std::vector<std::size_t> segments;
        for (const auto& s : p.segments) segments.push_back(s.size());
        return py::dict("inband_bytes"_a = p.inband.size(), "segments"_a = segments,
                        "header_size"_a = p.header_size(), "encoded_size"_a = p.encoded_size());
      },
      "obj"_a, "out_of_band_floor"_a = py::none());
  m.def(
      "measure_throughput",
      [](std::size_t size_bytes, const std::string& mode, int iterations) {
        hprm::ThroughputMode tm;
        if (mode == "in_band") tm = hprm::ThroughputMode::in_band;
        else if (mode == "out_of_band") tm = hprm::ThroughputMode::out_of_band;
        else throw py::value_error("mode must be 'in_band' or 'out_of_band'");
        const auto t = hprm::measure_throughput(size_bytes, tm, iterations);
        return py::dict("serialize_mb_per_s"_a = t.serialize_mb_per_s, "deserialize_mb_per_s"_a = t.deserialize_mb_per_s);
      },
      "size_bytes"_a, "mode"_a, "iterations"_a = 20);

  m.def(
      "validate_topology",
      [](const std::string& json_text) {
        const auto report = hprm::validate_topology(hprm::topology_from_json(json_text));
        py::list out;
        for (const auto& v : report.violations) {
          const char* kind = v.kind == hprm::TopologyViolation::Kind::zero_delay_cycle ? "zero_delay_cycle"
                                                                                      : "dangling_endpoint";
          out.append(py::dict("kind"_a = kind, "message"_a = v.message, "federates"_a = v.federates));
        }
        return out;
      },
      "json_text"_a, "Returns the violations in a topology JSON document; an empty list means it is valid.");
  m.def(
      "normalize_topology", [](const std::string& json_text) { return hprm::topology_to_json(hprm::topology_from_json(json_text)); },
      "json_text"_a);

  m.def("percentile", &hprm::bench::percentile, "samples"_a, "q"_a, "Nearest-rank percentile, q in (0, 1].");
  m.def(
      "format_report",
      [](const std::vector<std::tuple<std::string, std::string, std::uint64_t, int, std::int64_t>>& rows) {
        std::vector<hprm::bench::LatencyRecord> records;
        for (const auto& [scenario, mode, size, iter, latency] : rows) {
          records.push_back({scenario, mode, size, iter, latency});
        }
        return hprm::bench::format_report(records);
      },
      "records"_a, "CSV report for (scenario, mode, size_bytes, iter, latency_ns) rows.");
}
