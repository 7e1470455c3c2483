#ifndef QH_QH_HPP_
#define QH_QH_HPP_

#include "qh/defect.hpp"
#include "qh/element.hpp"
#include "qh/enumerate.hpp"
#include "qh/error.hpp"
#include "qh/experiment.hpp"
#include "qh/extension.hpp"
#include "qh/group.hpp"
#include "qh/qmap.hpp"
#include "qh/report.hpp"
#include "qh/spec.hpp"
#include "qh/structure.hpp"
#include "qh/word.hpp"

#endif  // QH_QH_HPP_
