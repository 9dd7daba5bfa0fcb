/** Loop through each of the columns in the given table, migrating each as a resource or relation. */
public List<Relation> migrateColumns(Table table, Model model) {
    List<Column> columns = table.getColumns();
    List<Relation> relations = new ArrayList<Relation>();
    String prefix = table.getName();
    int migrated = 0;
    for (int i = 0; i < columns.size(); i++) {
        Column column = columns.get(i);
        if (column.isForeignKey()) {
            relations.add(migrateRelation(model, prefix, column));
        } else {
            migrated += migrateResource(model, column);
        }
    }
    return relations;
}
