use std::collections::BTreeMap;

use crate::frontend::ast::{Device, ParamMode, Resolved};
use crate::frontend::Span;

use super::KrlType;

pub type ScopeId = usize;

/// The root scope holds system variables, globals, routines and global types.
pub const ROOT: ScopeId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeOwner {
    Program,
    /// Index into `Program::routines`.
    Routine(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    Variable,
    Parameter(ParamMode),
    SystemVariable,
    Routine(usize),
    Label(u32),
    Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    /// Storage type for variables, the struct type for `Type` symbols,
    /// the return type for functions.
    pub ty: Option<KrlType>,
    pub storage: Option<Resolved>,
    pub scope: ScopeId,
    pub span: Span,
}

impl Symbol {
    pub fn slot(&self) -> Option<u16> {
        match self.storage {
            Some(Resolved::Local(s)) | Some(Resolved::Global(s)) => Some(s),
            _ => None,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(
            self.kind,
            SymbolKind::Variable | SymbolKind::Parameter(_) | SymbolKind::SystemVariable
        )
    }

    pub fn device(&self) -> Option<Device> {
        match self.storage {
            Some(Resolved::Device(d)) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    pub owner: ScopeOwner,
    pub entries: BTreeMap<String, Symbol>,
}

/// Arena of scopes; scope `ROOT` is the program scope and routine `i` owns
/// scope `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeTree {
    scopes: Vec<Scope>,
}

impl Default for ScopeTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ScopeTree {
    pub fn new() -> Self {
        ScopeTree {
            scopes: vec![Scope {
                parent: None,
                owner: ScopeOwner::Program,
                entries: BTreeMap::new(),
            }],
        }
    }

    pub fn add_scope(&mut self, parent: ScopeId, owner: ScopeOwner) -> ScopeId {
        self.scopes.push(Scope {
            parent: Some(parent),
            owner,
            entries: BTreeMap::new(),
        });
        self.scopes.len() - 1
    }

    pub fn scope(&self, id: ScopeId) -> &Scope {
        &self.scopes[id]
    }

    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    pub fn routine_scope(&self, routine: usize) -> ScopeId {
        routine + 1
    }

    /// Insert into one table; returns the existing symbol on a name clash.
    pub fn insert(&mut self, scope: ScopeId, sym: Symbol) -> Result<(), &Symbol> {
        let entries = &mut self.scopes[scope].entries;
        if entries.contains_key(&sym.name) {
            return Err(&self.scopes[scope].entries[&sym.name]);
        }
        entries.insert(sym.name.clone(), sym);
        Ok(())
    }

    pub(crate) fn entry_mut(&mut self, scope: ScopeId, name: &str) -> Option<&mut Symbol> {
        self.scopes[scope].entries.get_mut(name)
    }

    pub fn get_local(&self, scope: ScopeId, name: &str) -> Option<&Symbol> {
        self.scopes[scope].entries.get(name)
    }

    /// Search `scope`, then its ancestors.
    pub fn lookup(&self, scope: ScopeId, name: &str) -> Option<&Symbol> {
        let mut cur = Some(scope);
        while let Some(id) = cur {
            if let Some(sym) = self.scopes[id].entries.get(name) {
                return Some(sym);
            }
            cur = self.scopes[id].parent;
        }
        None
    }
}
