#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evsamp/events.hpp"
#include "evsamp/frames.hpp"

namespace py = pybind11;
using namespace evs;

PYBIND11_MODULE(_evsamp, m) {
    m.doc() = "adaptive event-stream sampling core";

    py::class_<Event>(m, "Event")
        .def(py::init([](int x, int y, int p, std::uint64_t t) {
                 return Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                              static_cast<std::uint8_t>(p), t};
             }),
             py::arg("x"), py::arg("y"), py::arg("p"), py::arg("t"))
        .def_readonly("x", &Event::x)
        .def_readonly("y", &Event::y)
        .def_readonly("p", &Event::p)
        .def_readonly("t", &Event::t)
        .def("__eq__", [](const Event& a, const Event& b) { return a == b; });

    py::class_<EventStream>(m, "EventStream")
        .def("__len__", &EventStream::size)
        .def_property_readonly("width", &EventStream::width)
        .def_property_readonly("height", &EventStream::height)
        .def_property_readonly("duration_us", &EventStream::duration_us);

    m.def("parse_text_stream", [](const std::string& text, int w, int h) {
        return parse_text_stream(text, w, h);
    });
}
