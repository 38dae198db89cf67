use std::collections::{HashMap, HashSet, VecDeque};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;

use super::{
    CallbackRecord, DetectionEvent, DynamicOrigin, DynamicUnit, EventKind, ExecutionOutcome,
    LoopStats, PredicateRecord, TerminatedBy, TraceAction,
};
use crate::config::EngineConfig;
use crate::hostenv::{self, Realm};
use crate::syntax::ast::{Function, Stmt};
use crate::syntax::{dynamic_unit_name, Program, SourceAnchor};
use crate::values::{
    FakedOrigin, FakedProvenance, Heap, JsStr, NumberSource, ObjId, ObjKind, Object, Rule, ScopeId,
    TypeTag, Value,
};

/// Non-local exits. `Timeout` cannot be caught by script code.
#[derive(Debug, Clone)]
pub(crate) enum Abort {
    Throw(Value),
    Timeout,
}

pub(crate) type R<T> = Result<T, Abort>;

#[derive(Debug, Clone)]
pub(crate) enum Completion {
    Normal,
    Break,
    Continue,
    Return(Value),
}

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub this: Value,
    pub var_scope: ScopeId,
    pub unit: Arc<str>,
    pub source: Arc<str>,
}

#[derive(Debug, Clone)]
pub(crate) enum CbTarget {
    Func(ObjId),
    Code { unit: String, text: String },
}

#[derive(Debug, Clone)]
pub(crate) struct CbEntry {
    pub api: String,
    pub registered_at: SourceAnchor,
    pub target: CbTarget,
}

#[derive(Debug, Default)]
pub(crate) struct Hoisted {
    pub vars: Vec<Arc<str>>,
    pub funcs: Vec<Arc<Function>>,
}

/// Longest string the engine will build, in UTF-16 units.
pub(crate) const MAX_STRING_LEN: usize = 1 << 25;
/// Objects allocated in one run before the run is abandoned.
pub(crate) const MAX_OBJECTS: usize = 8_000_000;
const MAX_PREDS: usize = 100_000;
const PAYLOAD_LIMIT: usize = 16 * 1024;

pub(crate) struct Interp {
    pub config: EngineConfig,
    deadline: Option<Instant>,
    pub heap: Heap,
    pub numbers: NumberSource,
    pub realm: Realm,
    pub global: ScopeId,
    pub scope: ScopeId,
    pub frames: Vec<Frame>,

    switches: Vec<(SourceAnchor, bool)>,
    consumed: Vec<bool>,
    unconsumed: usize,
    preds: Vec<PredicateRecord>,
    pred_seen: HashSet<(SourceAnchor, bool)>,

    events: Vec<DetectionEvent>,
    events_dropped: u64,
    recoveries: Vec<TraceAction>,
    recoveries_dropped: u64,
    new_js: Vec<DynamicUnit>,
    dyn_counters: HashMap<(Arc<str>, usize), usize>,

    pub cbq: VecDeque<CbEntry>,
    cb_seen: HashSet<ObjId>,
    callbacks_invoked: Vec<CallbackRecord>,

    loop_stats: IndexMap<SourceAnchor, LoopStats>,
    pub loop_stack: Vec<usize>,
    pub loop_cutoffs: u64,
    pub recursion_cutoffs: u64,
    /// Functions that reached the recursion cap; further calls are skipped.
    pub capped: HashSet<*const Function>,

    pub call_depth: usize,
    pub try_depth: usize,
    pub catch_depth: usize,
    steps: u64,

    pub write_buffer: String,
    pub write_anchor: Option<SourceAnchor>,
    pub completion_value: Value,
    pub hoist_cache: HashMap<usize, (Arc<Function>, Rc<Hoisted>)>,
    pub regex_cache: HashMap<(String, String), Option<Rc<regex::Regex>>>,
    pub timer_counter: f64,
    pub exhausted_heap: bool,
    /// Arrays currently being joined, to cut cycles.
    pub join_stack: Vec<ObjId>,
}

impl Interp {
    pub fn new(config: EngineConfig, deadline: Option<Instant>) -> Self {
        let mut heap = Heap::new();
        let global = heap.new_scope(None, None);
        let mut interp = Interp {
            numbers: NumberSource::new(config.seed),
            config,
            deadline,
            heap,
            realm: Realm::placeholder(),
            global,
            scope: global,
            frames: Vec::new(),
            switches: Vec::new(),
            consumed: Vec::new(),
            unconsumed: 0,
            preds: Vec::new(),
            pred_seen: HashSet::new(),
            events: Vec::new(),
            events_dropped: 0,
            recoveries: Vec::new(),
            recoveries_dropped: 0,
            new_js: Vec::new(),
            dyn_counters: HashMap::new(),
            cbq: VecDeque::new(),
            cb_seen: HashSet::new(),
            callbacks_invoked: Vec::new(),
            loop_stats: IndexMap::new(),
            loop_stack: Vec::new(),
            loop_cutoffs: 0,
            recursion_cutoffs: 0,
            capped: HashSet::new(),
            call_depth: 0,
            try_depth: 0,
            catch_depth: 0,
            steps: 0,
            write_buffer: String::new(),
            write_anchor: None,
            completion_value: Value::Undefined,
            hoist_cache: HashMap::new(),
            regex_cache: HashMap::new(),
            timer_counter: 0.0,
            exhausted_heap: false,
            join_stack: Vec::new(),
        };
        interp.realm = hostenv::install(&mut interp);
        interp.heap.scope_mut(global).object = Some(interp.realm.window);
        interp
    }

    pub fn run_program(
        &mut self,
        program: &Program,
        switches: &super::SwitchSequence,
    ) -> ExecutionOutcome {
        self.switches = switches.entries.clone();
        self.consumed = vec![false; self.switches.len()];
        self.unconsumed = self.switches.len();
        for (anchor, dir) in &switches.entries {
            self.preds.push(PredicateRecord {
                anchor: anchor.clone(),
                taken: *dir,
                forced: true,
            });
            self.pred_seen.insert((anchor.clone(), *dir));
        }
        self.frames.push(Frame {
            this: Value::Object(self.realm.window),
            var_scope: self.global,
            unit: program.unit_name().clone(),
            source: program.source.clone(),
        });

        let mut timed_out = self.run_statements_top(&program.statements);
        if !timed_out {
            timed_out = self.drain_callbacks().is_err();
        }
        if !timed_out {
            self.flush_document_writes();
        }
        self.frames.clear();
        self.finish(program.unit_name(), timed_out)
    }

    /// Runs top-level statements, logging uncaught throws and continuing.
    /// Returns true when the run was aborted.
    pub fn run_statements_top(&mut self, stmts: &[Stmt]) -> bool {
        let var_scope = self
            .frames
            .last()
            .map(|f| f.var_scope)
            .unwrap_or(self.global);
        self.hoist_into(stmts, var_scope, None);
        for stmt in stmts {
            match self.exec_stmt(stmt) {
                Ok(_) => {}
                Err(Abort::Throw(v)) => {
                    let detail = self.describe(&v);
                    self.log(
                        &stmt.anchor,
                        "<toplevel>",
                        Rule::UncaughtThrow,
                        None,
                        None,
                        Some(detail),
                    );
                }
                Err(Abort::Timeout) => return true,
            }
        }
        false
    }

    fn finish(&mut self, unit: &str, timed_out: bool) -> ExecutionOutcome {
        let unconsumed_switches: Vec<(SourceAnchor, bool)> = self
            .switches
            .iter()
            .zip(&self.consumed)
            .filter(|(_, c)| !**c)
            .map(|(s, _)| s.clone())
            .collect();
        let terminated_by = if timed_out {
            TerminatedBy::GlobalTimeout
        } else if self.loop_cutoffs > 0 {
            TerminatedBy::LoopBudget
        } else if self.recursion_cutoffs > 0 {
            TerminatedBy::RecursionCap
        } else {
            TerminatedBy::Normal
        };
        ExecutionOutcome {
            unit: unit.to_string(),
            preds: std::mem::take(&mut self.preds),
            new_js: std::mem::take(&mut self.new_js),
            events: std::mem::take(&mut self.events),
            recoveries: std::mem::take(&mut self.recoveries),
            terminated_by,
            callbacks_invoked: std::mem::take(&mut self.callbacks_invoked),
            loop_stats: std::mem::take(&mut self.loop_stats).into_values().collect(),
            prefix_mismatch: !unconsumed_switches.is_empty(),
            unconsumed_switches,
            loop_cutoffs: self.loop_cutoffs,
            recursion_cutoffs: self.recursion_cutoffs,
            events_dropped: self.events_dropped,
            recoveries_dropped: self.recoveries_dropped,
            wall_time_ms: 0,
        }
    }

    // ----- budgets -----

    /// Counts one unit of work and checks the deadline every so often.
    pub fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps & 1023 == 0 {
            self.check_deadline()?;
            if self.heap.object_count() > MAX_OBJECTS {
                self.exhausted_heap = true;
                return Err(Abort::Timeout);
            }
        }
        Ok(())
    }

    pub fn check_deadline(&self) -> R<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Abort::Timeout),
            _ => Ok(()),
        }
    }

    // ----- predicates -----

    /// Consumes a pending switch for `anchor`, if any.
    pub fn forced(&mut self, anchor: &SourceAnchor) -> Option<bool> {
        if self.unconsumed == 0 {
            return None;
        }
        let i = (0..self.switches.len())
            .find(|&i| !self.consumed[i] && self.switches[i].0 == *anchor)?;
        self.consumed[i] = true;
        self.unconsumed -= 1;
        Some(self.switches[i].1)
    }

    pub fn record(&mut self, anchor: &SourceAnchor, taken: bool) {
        if self.preds.len() >= MAX_PREDS {
            return;
        }
        let key = (anchor.clone(), taken);
        if self.pred_seen.contains(&key) {
            return;
        }
        self.pred_seen.insert(key);
        self.preds.push(PredicateRecord {
            anchor: anchor.clone(),
            taken,
            forced: false,
        });
    }

    /// Direction to take at a branch whose condition evaluated to `natural`.
    pub fn branch(&mut self, anchor: &SourceAnchor, natural: bool) -> bool {
        match self.forced(anchor) {
            Some(dir) => dir,
            None => {
                self.record(anchor, natural);
                natural
            }
        }
    }

    // ----- logs and events -----

    pub fn log(
        &mut self,
        anchor: &SourceAnchor,
        subject: impl Into<String>,
        rule: Rule,
        becomes: Option<TypeTag>,
        array_length: Option<u64>,
        detail: Option<String>,
    ) {
        if self.recoveries.len() >= self.config.budgets.max_trace_per_run {
            self.recoveries_dropped += 1;
            return;
        }
        self.recoveries.push(TraceAction {
            anchor: anchor.clone(),
            subject: subject.into(),
            rule,
            becomes,
            array_length,
            detail,
        });
    }

    pub fn emit(&mut self, kind: EventKind, payload: &str, anchor: &SourceAnchor) {
        if self.events.len() >= self.config.budgets.max_events_per_run {
            self.events_dropped += 1;
            return;
        }
        let payload = truncate(payload, PAYLOAD_LIMIT);
        self.events.push(DetectionEvent {
            kind,
            payload,
            anchor: anchor.clone(),
            in_catch: self.catch_depth > 0,
        });
    }

    pub fn emit_js(&mut self, kind: EventKind, payload: &JsStr, anchor: &SourceAnchor) {
        let text = payload.prefix_string(PAYLOAD_LIMIT);
        self.emit(kind, &text, anchor);
    }

    /// Name for the next dynamic unit produced at `anchor`.
    pub fn next_dynamic_name(&mut self, anchor: &SourceAnchor) -> String {
        let key = (anchor.source_name.clone(), anchor.offset);
        let n = self.dyn_counters.entry(key).or_insert(0);
        let name = dynamic_unit_name(&anchor.source_name, anchor.offset, *n);
        *n += 1;
        name
    }

    pub fn add_new_js(
        &mut self,
        name: String,
        text: String,
        origin: DynamicOrigin,
        anchor: &SourceAnchor,
    ) {
        self.new_js.push(DynamicUnit {
            name,
            text,
            origin,
            anchor: anchor.clone(),
        });
    }

    pub fn enqueue_callback(&mut self, api: &str, anchor: &SourceAnchor, target: CbTarget) -> bool {
        if let CbTarget::Func(id) = target {
            if !self.cb_seen.insert(id) {
                return false;
            }
        }
        self.cbq.push_back(CbEntry {
            api: api.to_string(),
            registered_at: anchor.clone(),
            target,
        });
        true
    }

    fn drain_callbacks(&mut self) -> R<()> {
        let mut invoked = 0usize;
        while let Some(entry) = self.cbq.pop_front() {
            if invoked >= self.config.budgets.max_callbacks_per_run {
                break;
            }
            invoked += 1;
            self.check_deadline()?;
            let target = match &entry.target {
                CbTarget::Func(id) => self.function_label(*id),
                CbTarget::Code { unit, .. } => unit.clone(),
            };
            self.callbacks_invoked.push(CallbackRecord {
                api: entry.api.clone(),
                registered_at: entry.registered_at.clone(),
                target,
            });
            let result = match entry.target {
                CbTarget::Func(id) => self.invoke_callback(id, &entry.registered_at),
                CbTarget::Code { unit, text } => {
                    self.run_code_unit(&unit, &text, &entry.registered_at)
                }
            };
            match result {
                Ok(()) => {}
                Err(Abort::Throw(v)) => {
                    let detail = self.describe(&v);
                    self.log(
                        &entry.registered_at,
                        entry.api.clone(),
                        Rule::UncaughtThrow,
                        None,
                        None,
                        Some(detail),
                    );
                }
                Err(Abort::Timeout) => return Err(Abort::Timeout),
            }
        }
        Ok(())
    }

    fn invoke_callback(&mut self, id: ObjId, anchor: &SourceAnchor) -> R<()> {
        let nparams = match &self.heap.get(id).kind {
            ObjKind::Function(crate::values::Callable::User { func, .. }) => func.params.len(),
            _ => 0,
        };
        let args: Vec<Value> = (0..nparams)
            .map(|i| {
                self.heap.make_faked(FakedProvenance {
                    name: format!("arg{i}"),
                    origin: FakedOrigin::Er1Lookup,
                    birth_anchor: anchor.clone(),
                })
            })
            .collect();
        let window = Value::Object(self.realm.window);
        self.call_value(Value::Object(id), window, args, anchor, "callback")?;
        Ok(())
    }

    /// Parses and runs `text` as a separate unit in the global scope.
    pub fn run_code_unit(&mut self, unit: &str, text: &str, anchor: &SourceAnchor) -> R<()> {
        let program = match crate::syntax::parse(text, unit) {
            Ok(p) => p,
            Err(e) => {
                self.log(
                    anchor,
                    unit,
                    Rule::ErrorRecovered,
                    None,
                    None,
                    Some(format!("SyntaxError: {}", e.message)),
                );
                return Ok(());
            }
        };
        let saved_scope = self.scope;
        self.scope = self.global;
        self.frames.push(Frame {
            this: Value::Object(self.realm.window),
            var_scope: self.global,
            unit: program.unit_name().clone(),
            source: program.source.clone(),
        });
        self.call_depth += 1;
        let aborted = self.run_statements_top(&program.statements);
        self.call_depth -= 1;
        self.frames.pop();
        self.scope = saved_scope;
        if aborted {
            Err(Abort::Timeout)
        } else {
            Ok(())
        }
    }

    fn flush_document_writes(&mut self) {
        if self.write_buffer.is_empty() {
            return;
        }
        let html = std::mem::take(&mut self.write_buffer);
        let anchor = self
            .write_anchor
            .clone()
            .unwrap_or_else(|| SourceAnchor::new("<document>", 0));
        for script in hostenv::extract_scripts(&html)
            .into_iter()
            .filter(|s| s.src.is_none())
        {
            let name = self.next_dynamic_name(&anchor);
            self.add_new_js(name, script.text, DynamicOrigin::DocumentWrite, &anchor);
        }
    }

    // ----- loops -----

    pub fn enter_loop(&mut self, anchor: &SourceAnchor) -> usize {
        let entry = self.loop_stats.entry(anchor.clone());
        let idx = entry.index();
        entry.or_insert_with(|| LoopStats {
            anchor: Some(anchor.clone()),
            ..LoopStats::default()
        });
        self.loop_stack.push(idx);
        idx
    }

    pub fn exit_loop(&mut self) {
        self.loop_stack.pop();
    }

    pub fn count_iteration(&mut self, idx: usize) {
        if let Some((_, s)) = self.loop_stats.get_index_mut(idx) {
            s.iterations += 1;
        }
    }

    pub fn loop_cutoff(&mut self, idx: usize, anchor: &SourceAnchor) {
        self.loop_cutoffs += 1;
        if let Some((_, s)) = self.loop_stats.get_index_mut(idx) {
            s.cutoffs += 1;
        }
        let ms = super::duration_ms(self.config.budgets.loop_budget);
        self.log(
            anchor,
            "loop",
            Rule::LoopBudget,
            None,
            None,
            Some(format!("exceeded {ms} ms")),
        );
    }

    /// Records a string stored into an indexed slot, for heap-spray detection.
    pub fn note_indexed_write(&mut self, value: &Value) {
        let Value::String(s) = value else { return };
        let Some(&idx) = self.loop_stack.last() else {
            return;
        };
        let len = s.len();
        if len == 0 {
            return;
        }
        let bucket = usize::BITS - 1 - len.leading_zeros();
        if let Some((_, stats)) = self.loop_stats.get_index_mut(idx) {
            *stats.indexed_string_writes.entry(bucket).or_insert(0) += 1;
        }
    }

    // ----- values -----

    pub fn alloc(&mut self, kind: ObjKind, proto: Option<ObjId>) -> ObjId {
        self.heap.alloc(Object::new(kind, proto))
    }

    pub fn new_object(&mut self) -> ObjId {
        let proto = self.realm.object_proto;
        self.alloc(ObjKind::Ordinary, Some(proto))
    }

    pub fn new_array(&mut self, items: Vec<Value>) -> Value {
        let proto = self.realm.array_proto;
        Value::Object(self.alloc(ObjKind::Array(items), Some(proto)))
    }

    pub fn fake(&mut self, name: &str, origin: FakedOrigin, anchor: &SourceAnchor) -> Value {
        self.heap.make_faked(FakedProvenance {
            name: name.to_string(),
            origin,
            birth_anchor: anchor.clone(),
        })
    }

    /// Applies a typing rule to a faked cell. Only FObj cells are rewritten;
    /// anything else is left alone and `false` is returned.
    pub fn retype_cell(
        &mut self,
        v: &Value,
        tag: TypeTag,
        rule: Rule,
        anchor: &SourceAnchor,
        subject: &str,
    ) -> bool {
        let Value::Object(id) = v else { return false };
        if self.heap.type_tag(v) != TypeTag::FObj {
            return false;
        }
        let number = if tag == TypeTag::Number {
            self.numbers.gen_number()
        } else {
            0.0
        };
        self.heap.retype(*id, tag, number);
        if tag == TypeTag::Obj {
            self.heap.get_mut(*id).proto = Some(self.realm.object_proto);
        }
        self.log(anchor, subject, rule, Some(tag), None, None);
        true
    }

    /// The value an engine-level error produces: a throw inside a protected
    /// region, otherwise a faked object so execution can carry on.
    pub fn engine_error(&mut self, kind: &str, message: &str, anchor: &SourceAnchor) -> R<Value> {
        if self.try_depth > 0 {
            let err = self.make_error(kind, message);
            return Err(Abort::Throw(err));
        }
        self.log(
            anchor,
            kind,
            Rule::ErrorRecovered,
            Some(TypeTag::FObj),
            None,
            Some(message.to_string()),
        );
        Ok(self.fake(kind, FakedOrigin::Er1Lookup, anchor))
    }

    pub fn make_error(&mut self, kind: &str, message: &str) -> Value {
        let proto = self.realm.error_proto_for(kind);
        let id = self.alloc(ObjKind::Error, Some(proto));
        self.heap
            .get_mut(id)
            .props
            .insert(Rc::from("message"), Value::str(message));
        Value::Object(id)
    }

    /// Short rendering of a value for logs; never runs script code.
    pub fn describe(&self, v: &Value) -> String {
        let v = self.heap.resolve(v.clone());
        match &v {
            Value::Undefined => "undefined".into(),
            Value::Null => "null".into(),
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => crate::values::number::number_to_string(*n),
            Value::String(s) => s.prefix_string(200),
            Value::Object(id) => {
                let obj = self.heap.get(*id);
                match &obj.kind {
                    ObjKind::Error => {
                        let name = self.error_name(*id);
                        let msg = obj
                            .props
                            .get("message")
                            .map(|m| self.describe(m))
                            .unwrap_or_default();
                        format!("{name}: {msg}")
                    }
                    ObjKind::Faked(f) => format!("<faked {}>", f.provenance.name),
                    ObjKind::Function(_) => format!("<function {}>", self.function_label(*id)),
                    _ => "[object Object]".into(),
                }
            }
        }
    }

    pub fn error_name(&self, id: ObjId) -> String {
        let mut cur = Some(id);
        let mut guard = 0;
        while let Some(c) = cur {
            if let Some(Value::String(s)) = self.heap.get(c).props.get("name") {
                return s.to_std_string();
            }
            cur = self.heap.get(c).proto;
            guard += 1;
            if guard > 64 {
                break;
            }
        }
        "Error".into()
    }

    pub fn function_label(&self, id: ObjId) -> String {
        match &self.heap.get(id).kind {
            ObjKind::Function(crate::values::Callable::User { func, .. }) => match &func.name {
                Some(n) => n.to_string(),
                None => format!("function@{}", func.anchor),
            },
            ObjKind::Function(crate::values::Callable::Builtin(i)) => {
                hostenv::builtin_name(*i).to_string()
            }
            ObjKind::Function(crate::values::Callable::Bound { target, .. }) => {
                format!("bound {}", self.function_label(*target))
            }
            ObjKind::Faked(f) => f.provenance.name.clone(),
            _ => "<object>".into(),
        }
    }
}

fn truncate(s: &str, limit: usize) -> String {
    if s.len() <= limit {
        return s.to_string();
    }
    let mut end = limit;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    s[..end].to_string()
}
